#include "kgqa/rank_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "kgqa/error.hpp"

namespace kgqa {

RankRecord compute_rank(std::span<const double> scores, size_t true_idx,
                        std::span<const char> filter_mask) {
  if (true_idx >= scores.size()) throw ContractError("true index out of range");
  if (!filter_mask.empty() && filter_mask.size() != scores.size()) {
    throw ContractError("filter mask length differs from score vector length");
  }
  if (!filter_mask.empty() && filter_mask[true_idx]) {
    throw ContractError("true index is masked by the filter");
  }
  const double target = scores[true_idx];
  uint64_t greater = 0;
  uint64_t greater_equal = 0;
  uint64_t candidates = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!filter_mask.empty() && filter_mask[i]) continue;
    ++candidates;
    if (scores[i] > target) ++greater;
    if (scores[i] >= target) ++greater_equal;
  }
  RankRecord r;
  r.optimistic = greater + 1;
  r.pessimistic = greater_equal;
  r.realistic = 0.5 * static_cast<double>(r.optimistic + r.pessimistic);
  r.num_candidates = candidates;
  return r;
}

double MetricsReport::hits(size_t k) const {
  auto it = hits_at.find(k);
  if (it == hits_at.end()) throw ContractError("hits@" + std::to_string(k) + " not computed");
  return it->second;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "queries: " << num_queries << "\n";
  os << "arithmetic_mean_rank: " << amr << "\n";
  os << "adjusted_arithmetic_mean_rank: " << aamr << "\n";
  os << "adjusted_arithmetic_mean_rank_index: " << aamri << "\n";
  for (const auto& [k, v] : hits_at) os << "hits_at_" << k << ": " << v << "\n";
  return os.str();
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["queries"] = num_queries;
  j["arithmetic_mean_rank"] = amr;
  j["expected_mean_rank"] = expected_mean_rank;
  j["adjusted_arithmetic_mean_rank"] = aamr;
  j["adjusted_arithmetic_mean_rank_index"] = aamri;
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [k, v] : hits_at) hits[std::to_string(k)] = v;
  j["hits_at"] = hits;
  return j;
}

MetricsReport summarize_ranks(std::span<const RankRecord> ranks, std::span<const size_t> ks) {
  if (ranks.empty()) throw ContractError("cannot summarize an empty rank set");
  MetricsReport m;
  m.num_queries = ranks.size();
  double rank_sum = 0.0;
  double expected_sum = 0.0;
  for (const auto& r : ranks) {
    rank_sum += r.realistic;
    expected_sum += 0.5 * (static_cast<double>(r.num_candidates) + 1.0);
  }
  const double n = static_cast<double>(ranks.size());
  m.amr = rank_sum / n;
  m.expected_mean_rank = expected_sum / n;
  m.aamr = m.amr / m.expected_mean_rank;
  // A single candidate per query leaves the index undefined; such a ranking is perfect.
  m.aamri = m.expected_mean_rank > 1.0 ? 1.0 - (m.amr - 1.0) / (m.expected_mean_rank - 1.0) : 1.0;
  for (size_t k : ks) {
    size_t hit = 0;
    for (const auto& r : ranks) {
      if (r.realistic <= static_cast<double>(k)) ++hit;
    }
    m.hits_at[k] = static_cast<double>(hit) / n;
  }
  return m;
}

KnownTriples::KnownTriples(std::span<const Triple> triples) {
  for (const auto& t : triples) add(t);
}

void KnownTriples::add(const Triple& t) {
  tails_[key(t.head, t.relation)].push_back(t.tail);
  heads_[key(t.relation, t.tail)].push_back(t.head);
}

std::span<const EntityId> KnownTriples::tails(EntityId h, RelationId r) const {
  auto it = tails_.find(key(h, r));
  if (it == tails_.end()) return {};
  return it->second;
}

std::span<const EntityId> KnownTriples::heads(RelationId r, EntityId t) const {
  auto it = heads_.find(key(r, t));
  if (it == heads_.end()) return {};
  return it->second;
}

MetricsReport evaluate_link_prediction(const TripleScorer& scorer, std::span<const Triple> eval_triples,
                                       const KnownTriples& known, const LinkPredictionOptions& options,
                                       std::vector<RankRecord>* ranks_out) {
  if (eval_triples.empty()) throw ContractError("evaluation triple set is empty");
  if (!options.head_queries && !options.tail_queries) {
    throw ConfigError("at least one of head/tail queries must be enabled");
  }
  std::vector<RankRecord> ranks;
  ranks.reserve(eval_triples.size() * 2);
  std::vector<char> mask(scorer.num_entities(), 0);

  auto rank_one = [&](const std::vector<double>& scores, EntityId target,
                      std::span<const EntityId> others) {
    if (!options.filtered) return compute_rank(scores, target);
    for (EntityId e : others) {
      if (e != target) mask[e] = 1;
    }
    auto r = compute_rank(scores, target, mask);
    for (EntityId e : others) mask[e] = 0;
    return r;
  };

  for (const auto& t : eval_triples) {
    if (options.tail_queries) {
      ranks.push_back(rank_one(scorer.score_tails(t.head, t.relation), t.tail,
                               known.tails(t.head, t.relation)));
    }
    if (options.head_queries) {
      ranks.push_back(rank_one(scorer.score_heads(t.relation, t.tail), t.head,
                               known.heads(t.relation, t.tail)));
    }
  }
  auto report = summarize_ranks(ranks, options.ks);
  if (ranks_out) *ranks_out = std::move(ranks);
  return report;
}

MetricsReport evaluate_link_prediction(const ComplexModel& model, std::span<const Triple> eval_triples,
                                       const KnownTriples& known, const LinkPredictionOptions& options,
                                       std::vector<RankRecord>* ranks_out) {
  return evaluate_link_prediction(ComplexScorer(model), eval_triples, known, options, ranks_out);
}

std::vector<EntityId> top_entities(std::span<const double> scores, size_t limit,
                                   std::span<const EntityId> excluded) {
  std::vector<EntityId> order;
  order.reserve(scores.size());
  for (EntityId i = 0; i < scores.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) order.push_back(i);
  }
  auto better = [&](EntityId a, EntityId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  limit = std::min(limit, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(limit), order.end(), better);
  order.resize(limit);
  return order;
}

}  // namespace kgqa
