#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/complex_model.hpp"
#include "kgqa/dataset_forge.hpp"
#include "kgqa/entity_matcher.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/question_models.hpp"

namespace kgqa {

// phi(head, e_q, a) for every entity a; `question_embedding` holds d real
// parts followed by d imaginary parts.
std::vector<double> score_answers(const ComplexModel& model, EntityId head,
                                  std::span<const double> question_embedding);

// Byte span of the first case-insensitive occurrence of `name` in `question`.
std::optional<CharSpan> find_mention(std::string_view question, std::string_view name);

// Question tokens with the head's display-name mention masked.
std::vector<uint32_t> example_tokens(const KnowledgeGraph& kg, const TokenVocabulary& vocab, const QAExample& ex);

// Masked token sequences labelled with their hop class.
std::vector<ClassifierExample> classifier_examples(const KnowledgeGraph& kg, const TokenVocabulary& vocab,
                                                   std::span<const QAExample> examples);

// Shared encoder/classifier vocabulary over (masked) training questions.
TokenVocabulary build_question_vocabulary(const KnowledgeGraph& kg, std::span<const QAExample> examples);

// Mean binary cross-entropy of sigmoid(scores) against label-smoothed
// multi-hot targets (eps/|E| everywhere, plus 1-eps on answers). Accumulates
// `scale` * d(loss)/d(encoder params) into `grad`; the KGE model is read only.
double qa_loss_and_gradient(const ComplexModel& model, const QuestionEncoder& encoder,
                            std::span<const uint32_t> tokens, EntityId head, std::span<const EntityId> answers,
                            double label_smoothing, std::span<double> grad, double scale = 1.0);

struct QATrainConfig {
  size_t width = 128;
  size_t epochs = 200;
  size_t batch_size = 32;
  double learning_rate = 2e-3;
  double weight_decay = 0.0;
  double label_smoothing = 0.1;
  size_t patience = 20;
  size_t eval_every = 1;
  uint64_t seed = 0;
};

struct QAEpoch {
  size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> valid_hits_at_10;
};

struct QATrainResult {
  QuestionEncoder encoder;
  std::vector<QAEpoch> history;
  size_t best_epoch = 0;
  bool stopped_early = false;
};

// Trains one encoder for a single hop class against a frozen KGE model.
QATrainResult train_qa(const ComplexModel& model, const KnowledgeGraph& kg, const TokenVocabulary& vocab,
                       std::span<const QAExample> train, std::span<const QAExample> valid,
                       const QATrainConfig& config, const std::function<void(const QAEpoch&)>& on_epoch = {});

// True when any answer is among the k best entities once the head is removed.
bool hit_at_k(std::span<const double> scores, EntityId head, std::span<const EntityId> answers, size_t k);

using QAScorer = std::function<std::vector<double>(const QAExample&)>;
double evaluate_qa(const QAScorer& scorer, std::span<const QAExample> test, size_t k);
double evaluate_qa(const ComplexModel& model, const QuestionEncoder& encoder, const KnowledgeGraph& kg,
                   const TokenVocabulary& vocab, std::span<const QAExample> test, size_t k);

struct QAPipeline {
  KnowledgeGraph kg;
  ComplexModel model;
  Gazetteer gazetteer;
  TokenVocabulary vocab;
  HopClassifier classifier;
  std::map<int, QuestionEncoder> encoders;
  size_t top_k = 10;
};

struct PipelinePaths {
  std::filesystem::path triples;
  std::optional<std::filesystem::path> nodes;
  std::optional<std::filesystem::path> synonyms;
  std::filesystem::path kge;
  std::filesystem::path classifier;
  std::map<int, std::filesystem::path> encoders;
};

// Loads and cross-checks every artifact; a missing file raises
// MissingFileError naming it.
QAPipeline load_pipeline(const PipelinePaths& paths);

struct RankedAnswer {
  EntityId entity = 0;
  double score = 0.0;
};

struct AnswerResult {
  HeadMatch head;
  HopPrediction hop;
  std::vector<RankedAnswer> answers;
};

// Entities by descending score (ties by index) with the head removed.
std::vector<RankedAnswer> rank_answers(const ComplexModel& model, EntityId head,
                                       std::span<const double> question_embedding, size_t limit);

// extract head -> classify hops -> encode -> score -> drop head -> top k.
AnswerResult answer_question(const QAPipeline& pipeline, std::string_view question,
                             std::optional<size_t> top_k = std::nullopt);

}  // namespace kgqa
