#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kgqa/complex_model.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/rng.hpp"

namespace kgqa {

enum class CorruptionMode { head, tail, both };

struct Corruption {
  Triple triple;
  CorruptionMode mode = CorruptionMode::tail;
};

// Replaces the head, the tail, or both with uniformly drawn entities until the
// result is absent from `train` (and differs from the input). Self-loops are
// only produced when the input is itself a self-loop. When `forced_mode` is
// empty the mode is drawn uniformly from the three options.
Corruption corrupt_triple(const Triple& triple, size_t num_entities, const TripleLookup& train,
                          Rng& rng, size_t max_retries = 100,
                          std::optional<CorruptionMode> forced_mode = std::nullopt);

struct LabeledTriple {
  Triple triple;
  int label = 1;  // +1 true, -1 corrupted
};

// Gradients for a set of rows, `values` holds 2*d entries per row (re then im).
struct RowGradients {
  std::vector<uint32_t> rows;
  std::vector<double> values;

  std::span<const double> re(size_t slot, size_t dim) const {
    return std::span(values).subspan(slot * 2 * dim, dim);
  }
  std::span<const double> im(size_t slot, size_t dim) const {
    return std::span(values).subspan(slot * 2 * dim + dim, dim);
  }
};

struct LossAndGradient {
  double loss = 0.0;
  double data_loss = 0.0;
  double regularization = 0.0;
  RowGradients entities;
  RowGradients relations;
};

double softplus(double x);

// mean softplus(-y*phi) + l2_weight * mean squared norm of the touched rows.
LossAndGradient loss_and_gradient(const ComplexModel& model, std::span<const LabeledTriple> batch,
                                  double l2_weight);

// AdaGrad with one accumulator per embedding row (mean of squared gradient).
class RowAdagrad {
 public:
  RowAdagrad(size_t num_entities, size_t num_relations, double learning_rate, double epsilon = 1e-10);
  void apply(ComplexModel& model, const LossAndGradient& grad);

 private:
  double learning_rate_;
  double epsilon_;
  std::vector<double> entity_acc_;
  std::vector<double> relation_acc_;
};

struct TrainConfig {
  size_t dim = 64;
  size_t epochs = 200;
  size_t batch_size = 1024;
  double learning_rate = 0.2;
  size_t negatives_per_positive = 8;
  double l2_weight = 1e-2;
  size_t patience = 20;
  size_t eval_every = 1;
  uint64_t seed = 0;
  size_t max_retries = 100;

  void validate() const;
};

struct EvaluationPoint {
  size_t epoch = 0;
  double metric = 0.0;
  double best_so_far = 0.0;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  std::vector<EvaluationPoint> evaluations;
  size_t epochs_run = 0;
  size_t best_epoch = 0;
  size_t stagnant_evaluations = 0;
  bool stopped_early = false;
};

struct KgeTrainResult {
  ComplexModel model;
  TrainHistory history;
};

// Validation metric, higher is better. Defaults to filtered hits@10 on `valid`.
using ValidationMetric = std::function<double(const ComplexModel&)>;
using EpochCallback = std::function<void(size_t epoch, double loss, const std::optional<EvaluationPoint>&)>;

struct TrainHooks {
  ValidationMetric validation;
  EpochCallback on_epoch;
};

// Mini-batch training with corrupted negatives and early stopping on the
// validation metric. Returns the best-validation snapshot (or the final model
// when no validation runs).
KgeTrainResult train_kge(const KnowledgeGraph& kg, std::span<const Triple> train,
                         std::span<const Triple> valid, const TrainConfig& config,
                         const TrainHooks& hooks = {});

}  // namespace kgqa
