#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/error.hpp"

namespace kgqa::detail {

inline std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot write " + path.string());
  return out;
}

inline std::string where(const std::filesystem::path& path, size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

}  // namespace kgqa::detail
