#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/complex_model.hpp"
#include "kgqa/kg_store.hpp"

namespace kgqa {

struct RankRecord {
  uint64_t optimistic = 0;
  uint64_t pessimistic = 0;
  double realistic = 0.0;
  uint64_t num_candidates = 0;
};

// Masked entries take no part in the ranking. `filter_mask` may be empty
// (no filtering); otherwise it has the same length as `scores`.
RankRecord compute_rank(std::span<const double> scores, size_t true_idx,
                        std::span<const char> filter_mask = {});

struct MetricsReport {
  size_t num_queries = 0;
  double amr = 0.0;
  double expected_mean_rank = 0.0;
  double aamr = 0.0;
  double aamri = 0.0;
  std::map<size_t, double> hits_at;

  double hits(size_t k) const;
  // `key: value` lines.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// AMR, the adjusted variants (expected random rank (n+1)/2 per query) and hits@k.
MetricsReport summarize_ranks(std::span<const RankRecord> ranks, std::span<const size_t> ks);

// Index of known-true triples for filtered ranking.
class KnownTriples {
 public:
  KnownTriples() = default;
  explicit KnownTriples(std::span<const Triple> triples);

  void add(const Triple& t);
  std::span<const EntityId> tails(EntityId h, RelationId r) const;
  std::span<const EntityId> heads(RelationId r, EntityId t) const;

 private:
  static uint64_t key(uint32_t a, uint32_t b) { return (static_cast<uint64_t>(a) << 32) | b; }
  std::unordered_map<uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<uint64_t, std::vector<EntityId>> heads_;
};

// Anything that can score every candidate tail of (h, r, ?) and head of (?, r, t).
class TripleScorer {
 public:
  virtual ~TripleScorer() = default;
  virtual size_t num_entities() const = 0;
  virtual std::vector<double> score_tails(EntityId h, RelationId r) const = 0;
  virtual std::vector<double> score_heads(RelationId r, EntityId t) const = 0;
};

class ComplexScorer final : public TripleScorer {
 public:
  explicit ComplexScorer(const ComplexModel& model) : model_(model) {}
  size_t num_entities() const override { return model_.num_entities(); }
  std::vector<double> score_tails(EntityId h, RelationId r) const override {
    return score_all_tails(model_, h, r);
  }
  std::vector<double> score_heads(RelationId r, EntityId t) const override {
    return score_all_heads(model_, r, t);
  }

 private:
  const ComplexModel& model_;
};

struct LinkPredictionOptions {
  std::vector<size_t> ks{1, 3, 10};
  bool filtered = true;
  bool head_queries = true;
  bool tail_queries = true;
};

// Ranks each triple's tail (and head) against all entities. With filtering,
// every other known-true answer to the same query is masked.
MetricsReport evaluate_link_prediction(const TripleScorer& scorer, std::span<const Triple> eval_triples,
                                       const KnownTriples& known,
                                       const LinkPredictionOptions& options = {},
                                       std::vector<RankRecord>* ranks_out = nullptr);

MetricsReport evaluate_link_prediction(const ComplexModel& model, std::span<const Triple> eval_triples,
                                       const KnownTriples& known,
                                       const LinkPredictionOptions& options = {},
                                       std::vector<RankRecord>* ranks_out = nullptr);

// Entity indices ordered by descending score, ties by ascending index, with
// `excluded` removed; at most `limit` entries.
std::vector<EntityId> top_entities(std::span<const double> scores, size_t limit,
                                   std::span<const EntityId> excluded = {});

}  // namespace kgqa
