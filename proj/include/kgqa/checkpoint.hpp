#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/complex_model.hpp"
#include "kgqa/kg_store.hpp"

namespace kgqa {

// Little-endian binary container shared by all model files:
//
//   magic[4] | version u16 | dim u32 | rows_a u64 | rows_b u64 | hash_a u64 | hash_b u64
//   followed by float32 matrices (row-major) and optional string tables.
//
// KGE files ("KGE1"): dim = d, rows_a = entity rows, rows_b = relation rows,
// hash_a/hash_b = entity/relation vocabulary fingerprints, then
// entity_re, entity_im, relation_re, relation_im.
struct ContainerHeader {
  std::array<char, 4> magic{};
  uint16_t version = 1;
  uint32_t dim = 0;
  uint64_t rows_a = 0;
  uint64_t rows_b = 0;
  uint64_t hash_a = 0;
  uint64_t hash_b = 0;
};

inline constexpr size_t kContainerHeaderBytes = 4 + 2 + 4 + 8 + 8 + 8 + 8;
inline constexpr uint16_t kContainerVersion = 1;
inline constexpr std::array<char, 4> kKgeMagic{'K', 'G', 'E', '1'};

class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, const ContainerHeader& header);
  void write_floats(std::span<const double> values);
  void write_strings(std::span<const std::string> values);
  // Flushes and reports I/O failure as WriteError.
  void finish();

 private:
  void put(const void* data, size_t n);
  std::filesystem::path path_;
  std::ofstream out_;
};

class ContainerReader {
 public:
  ContainerReader(const std::filesystem::path& path, const std::array<char, 4>& expected_magic);
  const ContainerHeader& header() const { return header_; }
  std::vector<double> read_floats(uint64_t count);
  std::vector<std::string> read_strings();
  void expect_end();

 private:
  void get(void* data, size_t n);
  std::filesystem::path path_;
  std::ifstream in_;
  ContainerHeader header_;
};

void save_checkpoint(const ComplexModel& model, uint64_t entity_fingerprint, uint64_t relation_fingerprint,
                     const std::filesystem::path& path);
void save_checkpoint(const ComplexModel& model, const KnowledgeGraph& kg, const std::filesystem::path& path);

struct LoadedCheckpoint {
  ComplexModel model;
  ContainerHeader header;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path);

// Verifies the stored vocabulary fingerprints against `kg`.
ComplexModel load_checkpoint(const std::filesystem::path& path, const KnowledgeGraph& kg);

}  // namespace kgqa
