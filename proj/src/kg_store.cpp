#include "kgqa/kg_store.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kgqa/error.hpp"
#include "kgqa/hashing.hpp"
#include "kgqa/rng.hpp"
#include "tsv.hpp"

namespace kgqa {

uint32_t Vocabulary::get_or_add(std::string_view key) {
  auto it = index_.find(std::string(key));
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<uint32_t>(names_.size());
  names_.emplace_back(key);
  index_.emplace(names_.back(), idx);
  return idx;
}

std::optional<uint32_t> Vocabulary::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::at(uint32_t index) const {
  if (index >= names_.size()) {
    throw IndexError("vocabulary index " + std::to_string(index) + " out of range (size " +
                     std::to_string(names_.size()) + ")");
  }
  return names_[index];
}

uint64_t Vocabulary::fingerprint() const {
  Fnv1a64 h;
  for (const auto& n : names_) h.update_record(n);
  return h.digest();
}

std::string LoadSummary::to_text() const {
  std::ostringstream os;
  os << "entities: " << entities << "\n"
     << "relations: " << relations << "\n"
     << "triples: " << triples << "\n"
     << "duplicates_dropped: " << duplicates_dropped << "\n"
     << "nodes_with_metadata: " << nodes_with_metadata << "\n";
  return os.str();
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const {
  check_entity(e);
  return std::span(out_edges_).subspan(out_offsets_[e], out_offsets_[e + 1] - out_offsets_[e]);
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId e) const {
  check_entity(e);
  return std::span(in_edges_).subspan(in_offsets_[e], in_offsets_[e + 1] - in_offsets_[e]);
}

const NodeMeta& KnowledgeGraph::meta(EntityId e) const {
  check_entity(e);
  return meta_[e];
}

bool KnowledgeGraph::has_names() const {
  return std::any_of(meta_.begin(), meta_.end(), [](const NodeMeta& m) { return !m.name.empty(); });
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e >= entities_.size()) {
    throw IndexError("entity index " + std::to_string(e) + " out of range (" +
                     std::to_string(entities_.size()) + " entities)");
  }
}

void KnowledgeGraph::check_relation(RelationId r) const {
  if (r >= relations_.size()) {
    throw IndexError("relation index " + std::to_string(r) + " out of range (" +
                     std::to_string(relations_.size()) + " relations)");
  }
}

EntityId KnowledgeGraphBuilder::add_entity(std::string_view id) { return entities_.get_or_add(id); }

RelationId KnowledgeGraphBuilder::add_relation(std::string_view id) {
  return relations_.get_or_add(id);
}

bool KnowledgeGraphBuilder::add_triple(std::string_view head, std::string_view relation,
                                       std::string_view tail) {
  const Triple t{entities_.get_or_add(head), relations_.get_or_add(relation),
                 entities_.get_or_add(tail)};
  if (!lookup_.insert(t).second) {
    ++duplicates_;
    return false;
  }
  triples_.push_back(t);
  return true;
}

void KnowledgeGraphBuilder::set_meta(std::string_view id, NodeMeta meta) {
  meta_[entities_.get_or_add(id)] = std::move(meta);
}

namespace {

void build_csr(size_t n, std::span<const Triple> triples, bool outgoing,
               std::vector<uint64_t>& offsets, std::vector<Edge>& edges) {
  offsets.assign(n + 1, 0);
  for (const auto& t : triples) ++offsets[(outgoing ? t.head : t.tail) + 1];
  for (size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  edges.resize(triples.size());
  std::vector<uint64_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& t : triples) {
    const EntityId from = outgoing ? t.head : t.tail;
    const EntityId to = outgoing ? t.tail : t.head;
    edges[cursor[from]++] = Edge{t.relation, to};
  }
  for (size_t i = 0; i < n; ++i) {
    std::sort(edges.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
              edges.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
  }
}

}  // namespace

KnowledgeGraph KnowledgeGraphBuilder::build() && {
  KnowledgeGraph kg;
  const size_t n = entities_.size();
  build_csr(n, triples_, true, kg.out_offsets_, kg.out_edges_);
  build_csr(n, triples_, false, kg.in_offsets_, kg.in_edges_);
  kg.meta_.resize(n);
  for (auto& [id, m] : meta_) kg.meta_[id] = std::move(m);
  kg.summary_ = LoadSummary{n, relations_.size(), triples_.size(), duplicates_, meta_.size()};
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  kg.triples_ = std::move(triples_);
  kg.lookup_ = std::move(lookup_);
  return kg;
}

namespace {

bool skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

std::vector<std::string> split_synonyms(std::string_view field) {
  std::vector<std::string> out;
  if (field.empty()) return out;
  for (auto s : detail::split_on(field, '|')) {
    if (!s.empty()) out.emplace_back(s);
  }
  return out;
}

}  // namespace

KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::optional<std::filesystem::path>& nodes_path) {
  KnowledgeGraphBuilder builder;
  {
    auto in = detail::open_for_read(triples_path);
    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = detail::strip_cr(raw);
      if (skippable(line)) continue;
      const auto fields = detail::split_on(line, '\t');
      if (fields.size() != 3) {
        throw ParseError(detail::where(triples_path, line_no) + ": expected 3 tab-separated fields, got " +
                         std::to_string(fields.size()));
      }
      if (line_no == 1 && fields[0] == "source" && fields[2] == "target") continue;
      if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
        throw ParseError(detail::where(triples_path, line_no) + ": empty field");
      }
      builder.add_triple(fields[0], fields[1], fields[2]);
    }
  }
  if (nodes_path) {
    auto in = detail::open_for_read(*nodes_path);
    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = detail::strip_cr(raw);
      if (skippable(line)) continue;
      const auto fields = detail::split_on(line, '\t');
      if (fields.size() != 3 && fields.size() != 4) {
        throw FormatError(detail::where(*nodes_path, line_no) +
                          ": node rows need 3 or 4 tab-separated fields (id, name, kind[, synonyms]), got " +
                          std::to_string(fields.size()));
      }
      if (line_no == 1 && fields[0] == "id" && fields[1] == "name") continue;
      if (fields[0].empty()) throw FormatError(detail::where(*nodes_path, line_no) + ": empty node id");
      NodeMeta meta{std::string(fields[1]), std::string(fields[2]),
                    fields.size() == 4 ? split_synonyms(fields[3]) : std::vector<std::string>{}};
      builder.set_meta(fields[0], std::move(meta));
    }
  }
  return std::move(builder).build();
}

const std::string& display_name(const KnowledgeGraph& kg, EntityId e) {
  const auto& name = kg.meta(e).name;
  return name.empty() ? kg.entities().at(e) : name;
}

std::vector<EntityId> neighbors(const KnowledgeGraph& kg, EntityId entity, RelationId relation,
                                Direction direction) {
  kg.check_entity(entity);
  kg.check_relation(relation);
  const auto edges = direction == Direction::forward ? kg.out_edges(entity) : kg.in_edges(entity);
  const auto lo = std::lower_bound(edges.begin(), edges.end(), Edge{relation, 0});
  const auto hi = std::lower_bound(edges.begin(), edges.end(), Edge{relation + 1, 0});
  std::vector<EntityId> out;
  out.reserve(static_cast<size_t>(hi - lo));
  for (auto it = lo; it != hi; ++it) out.push_back(it->other);
  return out;
}

std::vector<EntityId> traverse_metapath(const KnowledgeGraph& kg, EntityId head,
                                        const Metapath& path) {
  kg.check_entity(head);
  std::vector<EntityId> frontier{head};
  std::vector<char> seen(kg.num_entities(), 0);
  for (const auto& step : path.steps) {
    kg.check_relation(step.relation);
    std::vector<EntityId> next;
    for (EntityId e : frontier) {
      for (EntityId n : neighbors(kg, e, step.relation, step.direction)) {
        if (!seen[n]) {
          seen[n] = 1;
          next.push_back(n);
        }
      }
    }
    for (EntityId n : next) seen[n] = 0;
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return frontier;
}

void SplitRatios::validate() const {
  if (!(train > 0 && valid > 0 && test > 0)) {
    throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1 (got " + std::to_string(train + valid + test) + ")");
  }
}

TripleSplit split_triples(const KnowledgeGraph& kg, const SplitRatios& ratios, uint64_t seed) {
  ratios.validate();
  std::vector<Triple> order(kg.triples().begin(), kg.triples().end());
  Rng rng(seed);
  shuffle(order, rng);

  const size_t n = order.size();
  const auto n_train = static_cast<size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_train,
                                static_cast<size_t>(std::llround(ratios.valid * static_cast<double>(n))));

  TripleSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::vector<char> entity_seen(kg.num_entities(), 0);
  std::vector<char> relation_seen(kg.num_relations(), 0);
  for (const auto& t : split.train) {
    entity_seen[t.head] = entity_seen[t.tail] = 1;
    relation_seen[t.relation] = 1;
  }
  auto covered = [&](const Triple& t) {
    return entity_seen[t.head] && entity_seen[t.tail] && relation_seen[t.relation];
  };
  for (size_t i = n_train; i < n; ++i) {
    const Triple& t = order[i];
    if (!covered(t)) {
      split.train.push_back(t);
      entity_seen[t.head] = entity_seen[t.tail] = 1;
      relation_seen[t.relation] = 1;
    } else if (i < n_train + n_valid) {
      split.valid.push_back(t);
    } else {
      split.test.push_back(t);
    }
  }
  return split;
}

void write_triples_tsv(const KnowledgeGraph& kg, std::span<const Triple> triples,
                       const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  for (const auto& t : triples) {
    out << kg.entities().at(t.head) << '\t' << kg.relations().at(t.relation) << '\t'
        << kg.entities().at(t.tail) << '\n';
  }
  if (!out) throw WriteError("failed writing " + path.string());
}

std::vector<Triple> read_triples_tsv(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<Triple> out;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (skippable(line)) continue;
    const auto f = detail::split_on(line, '\t');
    if (f.size() != 3) throw ParseError(detail::where(path, line_no) + ": expected 3 fields");
    const auto h = kg.entities().find(f[0]);
    const auto r = kg.relations().find(f[1]);
    const auto t = kg.entities().find(f[2]);
    if (!h || !r || !t) {
      throw DataError(detail::where(path, line_no) + ": triple refers to an id not in the graph");
    }
    out.push_back(Triple{*h, *r, *t});
  }
  return out;
}

}  // namespace kgqa
