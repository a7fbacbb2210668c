#include "kgqa/text.hpp"

#include <cctype>

namespace kgqa {

namespace {

bool is_word(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::vector<WordToken> split_words(std::string_view text) {
  std::vector<WordToken> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (!is_word(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n) {
      const auto c = static_cast<unsigned char>(text[j]);
      if (is_word(c)) {
        ++j;
      } else if (c == '-' && j + 1 < n && is_word(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
      } else {
        break;
      }
    }
    WordToken tok{std::string(), CharSpan{i, j}};
    tok.text.reserve(j - i);
    for (size_t k = i; k < j; ++k) {
      const auto c = static_cast<unsigned char>(text[k]);
      tok.text.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
    out.push_back(std::move(tok));
    i = j;
  }
  return out;
}

}  // namespace kgqa
