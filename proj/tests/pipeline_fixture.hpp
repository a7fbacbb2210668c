#pragma once

#include <chrono>
#include <map>
#include <vector>

#include "kgqa/dataset_forge.hpp"
#include "kgqa/kge_training.hpp"
#include "kgqa/qa_engine.hpp"
#include "kgqa/rank_eval.hpp"
#include "kgqa/synthetic_kg.hpp"
#include "gradient_check.hpp"

namespace kgqa::testing {

// Synthetic graph with untrained models; fast, for contract tests.
inline QAPipeline random_pipeline(uint64_t seed, size_t dim = 8) {
  Rng rng(seed);
  auto synth = make_synthetic_kg();
  const auto qa = generate_qa(synth.kg, synth.templates, GenerateOptions{});
  QAPipeline p;
  p.vocab = build_question_vocabulary(synth.kg, qa);
  p.model = random_complex_model(synth.kg.num_entities(), synth.kg.num_relations(), dim, rng, 0.5);
  p.model.round_to_storage();
  p.gazetteer = Gazetteer::build(synth.kg);
  p.classifier = HopClassifier(p.vocab.size(), 16);
  p.classifier.initialize(rng);
  for (auto& x : p.classifier.parameters()) x = static_cast<float>(x + uniform_real(rng, -0.3, 0.3));
  for (int hops = 1; hops <= 3; ++hops) {
    QuestionEncoder enc(p.vocab.size(), 16, dim);
    enc.initialize(rng);
    for (auto& x : enc.output_bias()) x = static_cast<float>(uniform_real(rng, -0.5, 0.5));
    p.encoders.emplace(hops, std::move(enc));
  }
  p.kg = std::move(synth.kg);
  return p;
}

// The full desk-scale run: synthetic graph, KGE, QA data, classifier and one
// encoder per hop class.
struct DeskExperiment {
  QAPipeline pipeline;
  TripleSplit triples;
  MetricsReport link_prediction;
  KgeTrainResult kge;
  QASplit qa;
  std::vector<QAExample> all_qa;
  std::vector<QuestionTemplate> templates;
  double classifier_accuracy = 0.0;
  std::map<int, double> qa_hits_at_10;
  double kge_seconds = 0.0;
  double total_seconds = 0.0;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline DeskExperiment run_desk_experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  DeskExperiment x;
  auto synth = make_synthetic_kg();
  x.templates = synth.templates;
  const auto& kg = synth.kg;

  x.triples = split_triples(kg, SplitRatios{}, 7);
  TrainConfig kcfg;
  kcfg.seed = 1;
  x.kge = train_kge(kg, x.triples.train, x.triples.valid, kcfg);
  x.kge_seconds = seconds_since(t0);
  const KnownTriples known(kg.triples());
  x.link_prediction = evaluate_link_prediction(x.kge.model, x.triples.test, known);

  x.all_qa = generate_qa(kg, synth.templates, GenerateOptions{});
  x.qa = split_qa(x.all_qa, SplitRatios{}, 3);
  auto vocab = build_question_vocabulary(kg, x.qa.train);

  const auto clf_train = classifier_examples(kg, vocab, x.qa.train);
  const auto clf_valid = classifier_examples(kg, vocab, x.qa.valid);
  const auto clf_test = classifier_examples(kg, vocab, x.qa.test);
  auto clf = train_classifier(vocab.size(), clf_train, clf_valid, ClassifierTrainConfig{});
  x.classifier_accuracy = classifier_accuracy(clf.classifier, clf_test);

  QAPipeline& p = x.pipeline;
  for (int hops = 1; hops <= 3; ++hops) {
    const auto train = filter_hops(x.qa.train, hops);
    const auto valid = filter_hops(x.qa.valid, hops);
    const auto test = filter_hops(x.qa.test, hops);
    auto result = train_qa(x.kge.model, kg, vocab, train, valid, QATrainConfig{});
    x.qa_hits_at_10[hops] = evaluate_qa(x.kge.model, result.encoder, kg, vocab, test, 10);
    p.encoders.emplace(hops, std::move(result.encoder));
  }
  p.gazetteer = Gazetteer::build(kg);
  p.model = x.kge.model;
  p.classifier = std::move(clf.classifier);
  p.vocab = std::move(vocab);
  p.kg = std::move(synth.kg);
  x.total_seconds = seconds_since(t0);
  return x;
}

}  // namespace kgqa::testing
