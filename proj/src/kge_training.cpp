#include "kgqa/kge_training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "kgqa/error.hpp"
#include "kgqa/rank_eval.hpp"

namespace kgqa {

Corruption corrupt_triple(const Triple& triple, size_t num_entities, const TripleLookup& train,
                          Rng& rng, size_t max_retries, std::optional<CorruptionMode> forced_mode) {
  if (num_entities < 2) throw ContractError("negative sampling needs at least 2 entities");
  const CorruptionMode mode =
      forced_mode ? *forced_mode : static_cast<CorruptionMode>(uniform_index(rng, 3));
  const bool input_self_loop = triple.head == triple.tail;
  for (size_t attempt = 0; attempt < max_retries; ++attempt) {
    Triple c = triple;
    if (mode != CorruptionMode::tail) c.head = static_cast<EntityId>(uniform_index(rng, num_entities));
    if (mode != CorruptionMode::head) c.tail = static_cast<EntityId>(uniform_index(rng, num_entities));
    if (c == triple) continue;
    if (c.head == c.tail && !input_self_loop) continue;
    if (train.contains(c)) continue;
    return Corruption{c, mode};
  }
  throw ExhaustedNegativesError("no negative found for triple (" + std::to_string(triple.head) + ", " +
                                std::to_string(triple.relation) + ", " + std::to_string(triple.tail) +
                                ") after " + std::to_string(max_retries) + " attempts");
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class RowAccumulator {
 public:
  explicit RowAccumulator(size_t dim) : dim_(dim) {}

  size_t index(uint32_t row) {
    auto [it, inserted] = slots_.try_emplace(row, out_.rows.size());
    if (inserted) {
      out_.rows.push_back(row);
      out_.values.resize(out_.values.size() + 2 * dim_, 0.0);
    }
    return it->second;
  }
  double* at(size_t index) { return out_.values.data() + index * 2 * dim_; }

  RowGradients& result() { return out_; }

 private:
  size_t dim_;
  std::unordered_map<uint32_t, size_t> slots_;
  RowGradients out_;
};

}  // namespace

LossAndGradient loss_and_gradient(const ComplexModel& model, std::span<const LabeledTriple> batch,
                                  double l2_weight) {
  if (batch.empty()) throw ContractError("empty batch");
  const size_t d = model.dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  RowAccumulator ent(d), rel(d);
  LossAndGradient out;

  for (const auto& item : batch) {
    const auto& t = item.triple;
    const double y = item.label > 0 ? 1.0 : -1.0;
    const auto h = model.entity(t.head);
    const auto r = model.relation(t.relation);
    const auto tl = model.entity(t.tail);
    const double phi = trilinear(h, r, tl);
    out.data_loss += softplus(-y * phi) * inv_b;
    const double coef = -y * sigmoid(-y * phi) * inv_b;

    // Resolve slots first: a new slot may reallocate the buffer.
    const size_t ih = ent.index(t.head);
    const size_t it = ent.index(t.tail);
    double* gh = ent.at(ih);
    double* gr = rel.at(rel.index(t.relation));
    double* gt = ent.at(it);
    for (size_t k = 0; k < d; ++k) {
      gh[k] += coef * (r.re[k] * tl.re[k] + r.im[k] * tl.im[k]);
      gh[d + k] += coef * (r.re[k] * tl.im[k] - r.im[k] * tl.re[k]);
      gr[k] += coef * (h.re[k] * tl.re[k] + h.im[k] * tl.im[k]);
      gr[d + k] += coef * (h.re[k] * tl.im[k] - h.im[k] * tl.re[k]);
      gt[k] += coef * (h.re[k] * r.re[k] - h.im[k] * r.im[k]);
      gt[d + k] += coef * (h.im[k] * r.re[k] + h.re[k] * r.im[k]);
    }
  }

  out.entities = std::move(ent.result());
  out.relations = std::move(rel.result());

  if (l2_weight != 0.0) {
    const double touched = static_cast<double>(out.entities.rows.size() + out.relations.rows.size());
    const double scale = l2_weight / touched;
    double sq = 0.0;
    auto regularize = [&](RowGradients& g, auto view_of) {
      for (size_t s = 0; s < g.rows.size(); ++s) {
        const ComplexView v = view_of(g.rows[s]);
        double* dst = g.values.data() + s * 2 * d;
        for (size_t k = 0; k < d; ++k) {
          sq += v.re[k] * v.re[k] + v.im[k] * v.im[k];
          dst[k] += 2.0 * scale * v.re[k];
          dst[d + k] += 2.0 * scale * v.im[k];
        }
      }
    };
    regularize(out.entities, [&](uint32_t row) { return model.entity(row); });
    regularize(out.relations, [&](uint32_t row) { return model.relation(row); });
    out.regularization = scale * sq;
  }
  out.loss = out.data_loss + out.regularization;
  return out;
}

RowAdagrad::RowAdagrad(size_t num_entities, size_t num_relations, double learning_rate, double epsilon)
    : learning_rate_(learning_rate),
      epsilon_(epsilon),
      entity_acc_(num_entities, 0.0),
      relation_acc_(num_relations, 0.0) {}

void RowAdagrad::apply(ComplexModel& model, const LossAndGradient& grad) {
  const size_t d = model.dim();
  auto step = [&](const RowGradients& g, std::vector<double>& acc, auto re_of, auto im_of) {
    for (size_t s = 0; s < g.rows.size(); ++s) {
      const double* gv = g.values.data() + s * 2 * d;
      double mean_sq = 0.0;
      for (size_t k = 0; k < 2 * d; ++k) mean_sq += gv[k] * gv[k];
      mean_sq /= static_cast<double>(2 * d);
      double& a = acc[g.rows[s]];
      a += mean_sq;
      const double rate = learning_rate_ / (std::sqrt(a) + epsilon_);
      auto re = re_of(g.rows[s]);
      auto im = im_of(g.rows[s]);
      for (size_t k = 0; k < d; ++k) {
        re[k] = static_cast<float>(re[k] - rate * gv[k]);
        im[k] = static_cast<float>(im[k] - rate * gv[d + k]);
      }
    }
  };
  step(grad.entities, entity_acc_, [&](uint32_t r) { return model.entity_re(r); },
       [&](uint32_t r) { return model.entity_im(r); });
  step(grad.relations, relation_acc_, [&](uint32_t r) { return model.relation_re(r); },
       [&](uint32_t r) { return model.relation_im(r); });
}

void TrainConfig::validate() const {
  if (dim < 1 || epochs < 1 || batch_size < 1 || negatives_per_positive < 1 || eval_every < 1 ||
      max_retries < 1) {
    throw ConfigError("training counts must all be >= 1");
  }
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (l2_weight < 0) throw ConfigError("l2 weight must be >= 0");
}

KgeTrainResult train_kge(const KnowledgeGraph& kg, std::span<const Triple> train,
                         std::span<const Triple> valid, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (train.empty()) throw ContractError("training triple set is empty");

  Rng rng(config.seed);
  ComplexModel model(kg.num_entities(), kg.num_relations(), config.dim);
  model.initialize_uniform(rng);
  RowAdagrad optimizer(kg.num_entities(), kg.num_relations(), config.learning_rate);

  const TripleLookup train_set(train.begin(), train.end());

  ValidationMetric validation = hooks.validation;
  KnownTriples known;
  if (!validation && !valid.empty()) {
    known = KnownTriples(kg.triples());
    validation = [&](const ComplexModel& m) {
      LinkPredictionOptions opts;
      opts.ks = {10};
      return evaluate_link_prediction(m, valid, known, opts).hits(10);
    };
  }

  KgeTrainResult result;
  auto& history = result.history;
  std::optional<ComplexModel> best;
  double best_metric = -std::numeric_limits<double>::infinity();

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledTriple> batch;
  batch.reserve(config.batch_size * (1 + config.negatives_per_positive));

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (size_t i = start; i < stop; ++i) {
        const Triple& pos = train[order[i]];
        batch.push_back({pos, 1});
        for (size_t n = 0; n < config.negatives_per_positive; ++n) {
          batch.push_back({corrupt_triple(pos, kg.num_entities(), train_set, rng, config.max_retries).triple, -1});
        }
      }
      const auto grad = loss_and_gradient(model, batch, config.l2_weight);
      if (!std::isfinite(grad.loss)) {
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
      }
      optimizer.apply(model, grad);
      loss_sum += grad.loss;
      ++batches;
    }
    if (!model.all_finite()) {
      throw DivergenceError("non-finite embedding values after epoch " + std::to_string(epoch));
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);
    history.epoch_loss.push_back(epoch_loss);
    history.epochs_run = epoch;

    std::optional<EvaluationPoint> point;
    if (validation && epoch % config.eval_every == 0) {
      const double metric = validation(model);
      if (metric > best_metric) {
        best_metric = metric;
        best = model;
        history.best_epoch = epoch;
        history.stagnant_evaluations = 0;
      } else {
        ++history.stagnant_evaluations;
      }
      point = EvaluationPoint{epoch, metric, best_metric};
      history.evaluations.push_back(*point);
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss, point);
    if (validation && history.stagnant_evaluations >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }

  result.model = best ? std::move(*best) : std::move(model);
  if (!best) history.best_epoch = history.epochs_run;
  return result;
}

}  // namespace kgqa
