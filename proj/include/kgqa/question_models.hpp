#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgqa/rng.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

class TokenVocabulary {
 public:
  static constexpr uint32_t kUnknown = 0;
  // Stands in for the head-entity mention inside a question.
  static constexpr uint32_t kEntity = 1;

  TokenVocabulary();
  static TokenVocabulary from_tokens(std::vector<std::string> tokens);

  uint32_t add(std::string_view token);
  uint32_t index(std::string_view token) const;
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  uint64_t fingerprint() const;

  bool operator==(const TokenVocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, uint32_t> index_;
};

// Word strings of `text`; when `mention` is given, the words it overlaps are
// replaced by one entity placeholder.
std::vector<std::string> question_words(std::string_view text, std::optional<CharSpan> mention = std::nullopt);

std::vector<uint32_t> tokenize(std::string_view text, const TokenVocabulary& vocab,
                               std::optional<CharSpan> mention = std::nullopt);

// Vocabulary over a question corpus (min frequency 1), in first-appearance order.
TokenVocabulary build_vocabulary(std::span<const std::vector<std::string>> corpus);

class AdamW {
 public:
  AdamW(size_t num_params, double learning_rate, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double epsilon = 1e-8);
  // Updates in place; values are rounded to float afterwards.
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, wd_, b1_, b2_, eps_;
  uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Mean-pooled token embeddings -> affine(m->m) -> ReLU -> affine(m->2d).
// The 2d outputs are the d real parts followed by the d imaginary parts of
// the question embedding.
class QuestionEncoder {
 public:
  struct Activations {
    std::vector<double> pooled;
    std::vector<double> hidden_pre;
    std::vector<double> hidden;
    std::vector<double> output;
  };

  QuestionEncoder() = default;
  QuestionEncoder(size_t vocab_size, size_t width, size_t dim);

  void initialize(Rng& rng);

  size_t vocab_size() const { return vocab_size_; }
  size_t width() const { return width_; }
  size_t dim() const { return dim_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::vector<double> encode(std::span<const uint32_t> tokens) const;
  Activations forward(std::span<const uint32_t> tokens) const;
  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(std::span<const uint32_t> tokens, const Activations& act, std::span<const double> grad_output,
                std::span<double> grad) const;

  // Views into the parameter block.
  std::span<double> output_weights();
  std::span<double> output_bias();

  bool operator==(const QuestionEncoder&) const = default;

 private:
  size_t vocab_size_ = 0, width_ = 0, dim_ = 0;
  size_t off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
  std::vector<double> params_;
};

struct HopPrediction {
  int hops = 1;
  std::array<double, 3> probabilities{};
};

// Mean-pooled token embeddings -> affine(m->3) -> softmax over {1,2,3} hops.
class HopClassifier {
 public:
  HopClassifier() = default;
  HopClassifier(size_t vocab_size, size_t width);

  // Random embeddings, zero output layer.
  void initialize(Rng& rng);

  size_t vocab_size() const { return vocab_size_; }
  size_t width() const { return width_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::array<double, 3> probabilities(std::span<const uint32_t> tokens) const;
  // Ties go to the smaller hop count.
  HopPrediction classify(std::span<const uint32_t> tokens) const;
  // Cross-entropy for one example; accumulates `scale` * gradient into `grad`.
  double loss_and_gradient(std::span<const uint32_t> tokens, int hops, std::span<double> grad,
                           double scale = 1.0) const;

  bool operator==(const HopClassifier&) const = default;

 private:
  std::vector<double> pooled(std::span<const uint32_t> tokens) const;
  std::array<double, 3> logits(std::span<const double> pooled) const;

  size_t vocab_size_ = 0, width_ = 0;
  size_t off_w_ = 0, off_b_ = 0;
  std::vector<double> params_;
};

struct ClassifierExample {
  std::vector<uint32_t> tokens;
  int hops = 1;
};

struct ClassifierTrainConfig {
  size_t width = 128;
  size_t epochs = 30;
  size_t batch_size = 32;
  double learning_rate = 5e-3;
  double weight_decay = 0.01;
  size_t patience = 5;
  uint64_t seed = 0;
};

struct ClassifierEpoch {
  size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
};

struct ClassifierTrainResult {
  HopClassifier classifier;
  std::vector<ClassifierEpoch> history;
};

double classifier_accuracy(const HopClassifier& clf, std::span<const ClassifierExample> examples);
double classifier_loss(const HopClassifier& clf, std::span<const ClassifierExample> examples);

// Cross-entropy with AdamW; returns the best-validation snapshot (last epoch
// when `valid` is empty).
ClassifierTrainResult train_classifier(size_t vocab_size, std::span<const ClassifierExample> train,
                                       std::span<const ClassifierExample> valid,
                                       const ClassifierTrainConfig& config,
                                       const std::function<void(const ClassifierEpoch&)>& on_epoch = {});

inline constexpr std::array<char, 4> kEncoderMagic{'Q', 'E', 'N', '1'};
inline constexpr std::array<char, 4> kClassifierMagic{'Q', 'C', 'L', '1'};

// Encoder file: dim = d, rows_a = vocabulary size, rows_b = width,
// hash_a = token vocabulary fingerprint, hash_b = entity vocabulary
// fingerprint of the graph the encoder was trained against.
void save_encoder(const QuestionEncoder& enc, const TokenVocabulary& vocab, uint64_t entity_fingerprint,
                  const std::filesystem::path& path);

struct LoadedEncoder {
  QuestionEncoder encoder;
  TokenVocabulary vocab;
  uint64_t entity_fingerprint = 0;
};
LoadedEncoder load_encoder(const std::filesystem::path& path);

// Classifier file: dim = 3, rows_a = vocabulary size, rows_b = width,
// hash_a = token vocabulary fingerprint, hash_b = 0.
void save_classifier(const HopClassifier& clf, const TokenVocabulary& vocab, const std::filesystem::path& path);

struct LoadedClassifier {
  HopClassifier classifier;
  TokenVocabulary vocab;
};
LoadedClassifier load_classifier(const std::filesystem::path& path);

}  // namespace kgqa
