#pragma once

#include <stdexcept>
#include <cstdint>
#include <string>
#include <vector>

namespace kgqa {

// Base of every error the library raises. `code()` is a stable,
// machine-readable tag used by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define KGQA_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  }

KGQA_DEFINE_ERROR(ParseError, "parse_error");
KGQA_DEFINE_ERROR(FormatError, "format_error");
KGQA_DEFINE_ERROR(IndexError, "index_error");
KGQA_DEFINE_ERROR(ConfigError, "config_error");
KGQA_DEFINE_ERROR(ContractError, "contract_error");
KGQA_DEFINE_ERROR(DataError, "data_error");
KGQA_DEFINE_ERROR(GenerationError, "generation_error");
KGQA_DEFINE_ERROR(ExhaustedNegativesError, "exhausted_negatives");
KGQA_DEFINE_ERROR(DivergenceError, "divergence");
KGQA_DEFINE_ERROR(WriteError, "write_error");
KGQA_DEFINE_ERROR(IncompatibleGraphError, "incompatible_graph");
KGQA_DEFINE_ERROR(CorruptionError, "corrupt_checkpoint");
KGQA_DEFINE_ERROR(MissingFileError, "missing_file");

#undef KGQA_DEFINE_ERROR

// No gazetteer entry matched anywhere in the question.
class NoEntityFoundError : public Error {
 public:
  NoEntityFoundError(std::string question, std::string normalized)
      : Error("no_entity", "no known entity found in question: \"" + question + "\""),
        question_(std::move(question)),
        normalized_(std::move(normalized)) {}

  const std::string& question() const noexcept { return question_; }
  const std::string& normalized_question() const noexcept { return normalized_; }

 private:
  std::string question_;
  std::string normalized_;
};

// The longest match maps to more than one entity.
class AmbiguousEntityError : public Error {
 public:
  AmbiguousEntityError(std::string surface, std::vector<uint32_t> candidates)
      : Error("ambiguous_entity", "surface form \"" + surface + "\" matches " +
                                      std::to_string(candidates.size()) + " entities"),
        surface_(std::move(surface)),
        candidates_(std::move(candidates)) {}

  const std::string& surface() const noexcept { return surface_; }
  const std::vector<uint32_t>& candidates() const noexcept { return candidates_; }

 private:
  std::string surface_;
  std::vector<uint32_t> candidates_;
};

}  // namespace kgqa
