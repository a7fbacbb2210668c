#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgqa {

using EntityId = uint32_t;
using RelationId = uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  size_t operator()(const Triple& t) const noexcept {
    uint64_t x = (static_cast<uint64_t>(t.head) << 32) ^ t.tail;
    x ^= static_cast<uint64_t>(t.relation) * 0x9e3779b97f4a7c15ULL;
    x ^= x >> 31;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 29;
    return static_cast<size_t>(x);
  }
};

using TripleLookup = std::unordered_set<Triple, TripleHash>;

// Dense string <-> index mapping in first-appearance order.
class Vocabulary {
 public:
  uint32_t get_or_add(std::string_view key);
  std::optional<uint32_t> find(std::string_view key) const;
  const std::string& at(uint32_t index) const;
  size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  std::span<const std::string> names() const { return names_; }

  // Order-sensitive content hash of the vocabulary.
  uint64_t fingerprint() const;

  bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, uint32_t> index_;
};

struct NodeMeta {
  std::string name;
  std::string kind;
  std::vector<std::string> synonyms;
};

enum class Direction { forward, inverse };

struct MetapathStep {
  RelationId relation = 0;
  Direction direction = Direction::forward;

  bool operator==(const MetapathStep&) const = default;
};

struct Metapath {
  std::vector<MetapathStep> steps;

  size_t hops() const { return steps.size(); }
  bool operator==(const Metapath&) const = default;
};

// One adjacency entry: the relation and the entity on the other end.
struct Edge {
  RelationId relation = 0;
  EntityId other = 0;

  auto operator<=>(const Edge&) const = default;
};

struct LoadSummary {
  size_t entities = 0;
  size_t relations = 0;
  size_t triples = 0;
  size_t duplicates_dropped = 0;
  size_t nodes_with_metadata = 0;

  std::string to_text() const;
};

// Immutable after construction. Triples are kept in insertion order with
// duplicates removed; both adjacency directions are stored CSR-style and
// sorted by (relation, other) within each entity.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  size_t num_entities() const { return entities_.size(); }
  size_t num_relations() const { return relations_.size(); }

  std::span<const Triple> triples() const { return triples_; }
  bool contains(const Triple& t) const { return lookup_.contains(t); }
  const TripleLookup& lookup() const { return lookup_; }

  std::span<const Edge> out_edges(EntityId e) const;
  std::span<const Edge> in_edges(EntityId e) const;

  // Metadata is default-constructed (empty name) for entities without a nodes-file row.
  const NodeMeta& meta(EntityId e) const;
  bool has_names() const;

  const LoadSummary& summary() const { return summary_; }

  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;

 private:
  friend class KnowledgeGraphBuilder;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  TripleLookup lookup_;
  std::vector<uint64_t> out_offsets_;
  std::vector<Edge> out_edges_;
  std::vector<uint64_t> in_offsets_;
  std::vector<Edge> in_edges_;
  std::vector<NodeMeta> meta_;
  LoadSummary summary_;
};

class KnowledgeGraphBuilder {
 public:
  EntityId add_entity(std::string_view id);
  RelationId add_relation(std::string_view id);
  // Returns false when the triple was already present.
  bool add_triple(std::string_view head, std::string_view relation, std::string_view tail);
  void set_meta(std::string_view id, NodeMeta meta);

  KnowledgeGraph build() &&;

 private:
  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  TripleLookup lookup_;
  std::unordered_map<EntityId, NodeMeta> meta_;
  size_t duplicates_ = 0;
};

// Triples: `head<TAB>relation<TAB>tail`. Nodes (optional):
// `id<TAB>name<TAB>kind[<TAB>syn1|syn2...]`. Blank lines and lines starting
// with '#' are ignored, as is a leading header row (`source ...` / `id ...`).
KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::optional<std::filesystem::path>& nodes_path = std::nullopt);

// Node name, or the entity id when the node has no name.
const std::string& display_name(const KnowledgeGraph& kg, EntityId e);

// Sorted, duplicate-free.
std::vector<EntityId> neighbors(const KnowledgeGraph& kg, EntityId entity, RelationId relation,
                                Direction direction);

// All entities reachable from `head` along the full path. Empty path -> {head}.
std::vector<EntityId> traverse_metapath(const KnowledgeGraph& kg, EntityId head,
                                        const Metapath& path);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;

  void validate() const;
};

struct TripleSplit {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Deterministic given seed. Any held-out triple carrying an entity or
// relation not covered by train is moved to train.
TripleSplit split_triples(const KnowledgeGraph& kg, const SplitRatios& ratios, uint64_t seed);

void write_triples_tsv(const KnowledgeGraph& kg, std::span<const Triple> triples,
                       const std::filesystem::path& path);
std::vector<Triple> read_triples_tsv(const KnowledgeGraph& kg,
                                     const std::filesystem::path& path);

}  // namespace kgqa
