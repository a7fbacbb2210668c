#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

// Half-open byte range [begin, end) into the original text.
struct CharSpan {
  size_t begin = 0;
  size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct WordToken {
  std::string text;
  CharSpan span;
};

// Lowercased word tokens. Whitespace and punctuation are boundaries, except a
// hyphen with word characters on both sides ("il-6"). Bytes >= 0x80 count as
// word characters so UTF-8 text is not torn apart.
std::vector<WordToken> split_words(std::string_view text);

}  // namespace kgqa
