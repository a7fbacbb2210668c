#include "kgqa/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "kgqa/error.hpp"

namespace kgqa {

namespace {

template <typename T>
void to_le(T value, unsigned char* out) {
  for (size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
}

template <typename T>
T from_le(const unsigned char* in) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[i]) << (8 * i);
  return v;
}

std::string magic_string(const std::array<char, 4>& m) { return std::string(m.begin(), m.end()); }

}  // namespace

ContainerWriter::ContainerWriter(const std::filesystem::path& path, const ContainerHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw WriteError("cannot open " + path.string() + " for writing");
  unsigned char buf[kContainerHeaderBytes];
  std::memcpy(buf, header.magic.data(), 4);
  to_le<uint16_t>(header.version, buf + 4);
  to_le<uint32_t>(header.dim, buf + 6);
  to_le<uint64_t>(header.rows_a, buf + 10);
  to_le<uint64_t>(header.rows_b, buf + 18);
  to_le<uint64_t>(header.hash_a, buf + 26);
  to_le<uint64_t>(header.hash_b, buf + 34);
  put(buf, sizeof buf);
}

void ContainerWriter::put(const void* data, size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw WriteError("write failed for " + path_.string());
}

void ContainerWriter::write_floats(std::span<const double> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (size_t i = 0; i < values.size(); ++i) {
    to_le<uint32_t>(std::bit_cast<uint32_t>(static_cast<float>(values[i])), buf.data() + 4 * i);
  }
  put(buf.data(), buf.size());
}

void ContainerWriter::write_strings(std::span<const std::string> values) {
  unsigned char n[8];
  to_le<uint64_t>(values.size(), n);
  put(n, 8);
  for (const auto& s : values) {
    unsigned char len[4];
    to_le<uint32_t>(static_cast<uint32_t>(s.size()), len);
    put(len, 4);
    put(s.data(), s.size());
  }
}

void ContainerWriter::finish() {
  out_.flush();
  if (!out_) throw WriteError("flush failed for " + path_.string());
  out_.close();
}

ContainerReader::ContainerReader(const std::filesystem::path& path, const std::array<char, 4>& expected_magic)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw MissingFileError("cannot open checkpoint " + path.string());
  unsigned char buf[kContainerHeaderBytes];
  in_.read(reinterpret_cast<char*>(buf), sizeof buf);
  if (in_.gcount() >= 4) std::memcpy(header_.magic.data(), buf, 4);
  if (in_.gcount() >= 4 && header_.magic != expected_magic) {
    throw FormatError(path.string() + ": bad magic \"" + magic_string(header_.magic) + "\", expected \"" +
                      magic_string(expected_magic) + "\"");
  }
  if (static_cast<size_t>(in_.gcount()) != sizeof buf) {
    throw CorruptionError(path.string() + ": truncated header");
  }
  header_.version = from_le<uint16_t>(buf + 4);
  if (header_.version != kContainerVersion) {
    throw FormatError(path.string() + ": unsupported format version " + std::to_string(header_.version));
  }
  header_.dim = from_le<uint32_t>(buf + 6);
  header_.rows_a = from_le<uint64_t>(buf + 10);
  header_.rows_b = from_le<uint64_t>(buf + 18);
  header_.hash_a = from_le<uint64_t>(buf + 26);
  header_.hash_b = from_le<uint64_t>(buf + 34);
}

void ContainerReader::get(void* data, size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in_.gcount()) != n) throw CorruptionError(path_.string() + ": truncated file");
}

std::vector<double> ContainerReader::read_floats(uint64_t count) {
  // Refuse absurd sizes before allocating.
  if (count > (uint64_t{1} << 36)) throw CorruptionError(path_.string() + ": implausible matrix size");
  std::vector<unsigned char> buf(count * 4);
  get(buf.data(), buf.size());
  std::vector<double> out(count);
  for (size_t i = 0; i < count; ++i) {
    out[i] = static_cast<double>(std::bit_cast<float>(from_le<uint32_t>(buf.data() + 4 * i)));
  }
  return out;
}

std::vector<std::string> ContainerReader::read_strings() {
  unsigned char n8[8];
  get(n8, 8);
  const auto n = from_le<uint64_t>(n8);
  if (n > (uint64_t{1} << 32)) throw CorruptionError(path_.string() + ": implausible string table size");
  std::vector<std::string> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    unsigned char l4[4];
    get(l4, 4);
    std::string s(from_le<uint32_t>(l4), '\0');
    get(s.data(), s.size());
    out.push_back(std::move(s));
  }
  return out;
}

void ContainerReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) {
    throw CorruptionError(path_.string() + ": trailing bytes after payload");
  }
}

void save_checkpoint(const ComplexModel& model, uint64_t entity_fingerprint, uint64_t relation_fingerprint,
                     const std::filesystem::path& path) {
  ContainerHeader h;
  h.magic = kKgeMagic;
  h.version = kContainerVersion;
  h.dim = static_cast<uint32_t>(model.dim());
  h.rows_a = model.num_entities();
  h.rows_b = model.num_relations();
  h.hash_a = entity_fingerprint;
  h.hash_b = relation_fingerprint;
  ContainerWriter w(path, h);
  w.write_floats(model.entity_re_matrix());
  w.write_floats(model.entity_im_matrix());
  w.write_floats(model.relation_re_matrix());
  w.write_floats(model.relation_im_matrix());
  w.finish();
}

void save_checkpoint(const ComplexModel& model, const KnowledgeGraph& kg, const std::filesystem::path& path) {
  save_checkpoint(model, kg.entities().fingerprint(), kg.relations().fingerprint(), path);
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& path) {
  ContainerReader r(path, kKgeMagic);
  const auto& h = r.header();
  if (h.dim == 0) throw CorruptionError(path.string() + ": zero embedding dimension");
  LoadedCheckpoint out{ComplexModel(h.rows_a, h.rows_b, h.dim), h};
  auto fill = [&](std::span<double> dst) {
    const auto v = r.read_floats(dst.size());
    std::copy(v.begin(), v.end(), dst.begin());
  };
  fill(out.model.entity_re_matrix());
  fill(out.model.entity_im_matrix());
  fill(out.model.relation_re_matrix());
  fill(out.model.relation_im_matrix());
  r.expect_end();
  return out;
}

ComplexModel load_checkpoint(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  auto loaded = read_checkpoint(path);
  const auto& h = loaded.header;
  if (h.hash_a != kg.entities().fingerprint() || h.hash_b != kg.relations().fingerprint() ||
      h.rows_a != kg.num_entities() || h.rows_b != kg.num_relations()) {
    throw IncompatibleGraphError(path.string() + " was trained against a different graph (" +
                                 std::to_string(h.rows_a) + " entities / " + std::to_string(h.rows_b) +
                                 " relations vs " + std::to_string(kg.num_entities()) + " / " +
                                 std::to_string(kg.num_relations()) + ")");
  }
  return std::move(loaded.model);
}

}  // namespace kgqa
