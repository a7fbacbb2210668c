#include "kgqa/qa_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "kgqa/checkpoint.hpp"
#include "kgqa/error.hpp"
#include "kgqa/rank_eval.hpp"

namespace kgqa {

std::vector<double> score_answers(const ComplexModel& model, EntityId head,
                                  std::span<const double> question_embedding) {
  const size_t d = model.dim();
  if (question_embedding.size() != 2 * d) {
    throw ContractError("question embedding has " + std::to_string(question_embedding.size()) +
                        " values, model needs " + std::to_string(2 * d));
  }
  return score_all_with(model, model.entity(head),
                        ComplexView{question_embedding.first(d), question_embedding.subspan(d)});
}

std::optional<CharSpan> find_mention(std::string_view question, std::string_view name) {
  if (name.empty() || name.size() > question.size()) return std::nullopt;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  const auto it = std::search(question.begin(), question.end(), name.begin(), name.end(), eq);
  if (it == question.end()) return std::nullopt;
  const auto begin = static_cast<size_t>(it - question.begin());
  return CharSpan{begin, begin + name.size()};
}

std::vector<uint32_t> example_tokens(const KnowledgeGraph& kg, const TokenVocabulary& vocab, const QAExample& ex) {
  return tokenize(ex.question, vocab, find_mention(ex.question, display_name(kg, ex.head)));
}

std::vector<ClassifierExample> classifier_examples(const KnowledgeGraph& kg, const TokenVocabulary& vocab,
                                                   std::span<const QAExample> examples) {
  std::vector<ClassifierExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({example_tokens(kg, vocab, ex), ex.hops});
  return out;
}

TokenVocabulary build_question_vocabulary(const KnowledgeGraph& kg, std::span<const QAExample> examples) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(examples.size());
  for (const auto& ex : examples) {
    corpus.push_back(question_words(ex.question, find_mention(ex.question, display_name(kg, ex.head))));
  }
  return build_vocabulary(corpus);
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double qa_loss_and_gradient(const ComplexModel& model, const QuestionEncoder& encoder,
                            std::span<const uint32_t> tokens, EntityId head, std::span<const EntityId> answers,
                            double label_smoothing, std::span<double> grad, double scale) {
  const size_t d = model.dim();
  const size_t n = model.num_entities();
  if (encoder.dim() != d) throw ContractError("encoder dimension differs from the KGE model");
  const auto act = encoder.forward(tokens);
  const auto scores = score_answers(model, head, act.output);

  std::vector<double> target(n, label_smoothing / static_cast<double>(n));
  for (EntityId a : answers) target.at(a) += 1.0 - label_smoothing;

  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  std::vector<double> g(n);
  for (size_t a = 0; a < n; ++a) {
    loss += (softplus(scores[a]) - target[a] * scores[a]) * inv_n;
    g[a] = (sigmoid(scores[a]) - target[a]) * inv_n;
  }

  // Back through phi(h, q, a) = sum_k Re(h_k q_k conj(a_k)).
  const auto e_re = model.entity_re_matrix();
  const auto e_im = model.entity_im_matrix();
  std::vector<double> gre(d, 0.0), gim(d, 0.0);  // E_re^T g, E_im^T g
  for (size_t a = 0; a < n; ++a) {
    if (g[a] == 0.0) continue;
    const double* rr = e_re.data() + a * d;
    const double* ri = e_im.data() + a * d;
    for (size_t k = 0; k < d; ++k) {
      gre[k] += g[a] * rr[k];
      gim[k] += g[a] * ri[k];
    }
  }
  const auto h = model.entity(head);
  std::vector<double> g_out(2 * d);
  for (size_t k = 0; k < d; ++k) {
    g_out[k] = scale * (h.re[k] * gre[k] + h.im[k] * gim[k]);
    g_out[d + k] = scale * (h.re[k] * gim[k] - h.im[k] * gre[k]);
  }
  encoder.backward(tokens, act, g_out, grad);
  return loss;
}

bool hit_at_k(std::span<const double> scores, EntityId head, std::span<const EntityId> answers, size_t k) {
  const EntityId excluded[] = {head};
  const auto top = top_entities(scores, k, excluded);
  return std::any_of(top.begin(), top.end(),
                     [&](EntityId e) { return std::find(answers.begin(), answers.end(), e) != answers.end(); });
}

double evaluate_qa(const QAScorer& scorer, std::span<const QAExample> test, size_t k) {
  if (test.empty()) throw ContractError("QA test set is empty");
  size_t hits = 0;
  for (const auto& ex : test) hits += hit_at_k(scorer(ex), ex.head, ex.answers, k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

double evaluate_qa(const ComplexModel& model, const QuestionEncoder& encoder, const KnowledgeGraph& kg,
                   const TokenVocabulary& vocab, std::span<const QAExample> test, size_t k) {
  return evaluate_qa(
      [&](const QAExample& ex) {
        return score_answers(model, ex.head, encoder.encode(example_tokens(kg, vocab, ex)));
      },
      test, k);
}

QATrainResult train_qa(const ComplexModel& model, const KnowledgeGraph& kg, const TokenVocabulary& vocab,
                       std::span<const QAExample> train, std::span<const QAExample> valid,
                       const QATrainConfig& config, const std::function<void(const QAEpoch&)>& on_epoch) {
  if (train.empty()) throw ContractError("QA training set is empty");
  if (config.epochs < 1 || config.batch_size < 1 || config.patience < 1 || config.eval_every < 1 ||
      !(config.learning_rate > 0) || config.label_smoothing < 0 || config.label_smoothing >= 1) {
    throw ConfigError("invalid QA training configuration");
  }
  const int hops = train.front().hops;
  for (const auto& ex : train) {
    if (ex.hops != hops) throw DataError("QA training examples mix hop classes");
    if (ex.answers.empty()) throw DataError("QA example without answers: " + ex.question);
  }

  struct Prepared {
    std::vector<uint32_t> tokens;
    EntityId head;
    std::span<const EntityId> answers;
  };
  std::vector<Prepared> data;
  data.reserve(train.size());
  for (const auto& ex : train) data.push_back({example_tokens(kg, vocab, ex), ex.head, ex.answers});

  Rng rng(config.seed);
  QuestionEncoder enc(vocab.size(), config.width, model.dim());
  enc.initialize(rng);
  AdamW opt(enc.parameters().size(), config.learning_rate, config.weight_decay);

  std::vector<Prepared> valid_data;
  for (const auto& ex : valid) valid_data.push_back({example_tokens(kg, vocab, ex), ex.head, ex.answers});
  std::vector<double> scratch(enc.parameters().size());
  auto valid_loss = [&] {
    double sum = 0.0;
    for (const auto& p : valid_data) {
      sum += qa_loss_and_gradient(model, enc, p.tokens, p.head, p.answers, config.label_smoothing, scratch, 0.0);
    }
    return sum / static_cast<double>(valid_data.size());
  };

  QATrainResult result;
  std::optional<QuestionEncoder> best;
  double best_metric = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  size_t stagnant = 0;

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(enc.parameters().size());

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (size_t i = start; i < stop; ++i) {
        const auto& p = data[order[i]];
        loss_sum += qa_loss_and_gradient(model, enc, p.tokens, p.head, p.answers, config.label_smoothing, grad,
                                         scale);
      }
      opt.step(enc.parameters(), grad);
    }
    const double loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(loss)) throw DivergenceError("non-finite QA loss in epoch " + std::to_string(epoch));

    QAEpoch rec{epoch, loss, std::nullopt};
    if (!valid.empty() && epoch % config.eval_every == 0) {
      rec.valid_hits_at_10 = evaluate_qa(model, enc, kg, vocab, valid, 10);
      const double vloss = valid_loss();
      // Patience counts hits@10 improvements only; an equal score with lower
      // validation loss still replaces the snapshot.
      if (*rec.valid_hits_at_10 > best_metric) {
        best_metric = *rec.valid_hits_at_10;
        best_loss = vloss;
        best = enc;
        result.best_epoch = epoch;
        stagnant = 0;
      } else {
        if (*rec.valid_hits_at_10 == best_metric && vloss < best_loss) {
          best_loss = vloss;
          best = enc;
          result.best_epoch = epoch;
        }
        ++stagnant;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stagnant >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (best) {
    result.encoder = std::move(*best);
  } else {
    result.encoder = std::move(enc);
    result.best_epoch = result.history.size();
  }
  return result;
}

QAPipeline load_pipeline(const PipelinePaths& paths) {
  auto require = [](const std::filesystem::path& p, const char* what) {
    if (p.empty() || !std::filesystem::exists(p)) {
      throw MissingFileError(std::string("missing ") + what + " file: " + (p.empty() ? "<unset>" : p.string()));
    }
  };
  require(paths.triples, "triples");
  if (paths.nodes) require(*paths.nodes, "nodes");
  if (paths.synonyms) require(*paths.synonyms, "synonyms");
  require(paths.kge, "KGE checkpoint");
  require(paths.classifier, "classifier checkpoint");
  if (paths.encoders.empty()) throw MissingFileError("no question encoder checkpoints configured");
  for (const auto& [hops, p] : paths.encoders) {
    require(p, ("encoder (" + std::to_string(hops) + "-hop)").c_str());
  }

  QAPipeline pl;
  pl.kg = load_kg(paths.triples, paths.nodes);
  pl.model = load_checkpoint(paths.kge, pl.kg);
  pl.gazetteer = Gazetteer::build(pl.kg);
  if (paths.synonyms) pl.gazetteer.add_synonyms_tsv(pl.kg, *paths.synonyms);

  auto clf = load_classifier(paths.classifier);
  pl.classifier = std::move(clf.classifier);
  pl.vocab = std::move(clf.vocab);
  for (const auto& [hops, p] : paths.encoders) {
    if (hops < 1 || hops > 3) throw ConfigError("encoder hop class must be 1, 2 or 3");
    auto enc = load_encoder(p);
    if (enc.entity_fingerprint != pl.kg.entities().fingerprint()) {
      throw IncompatibleGraphError(p.string() + " was trained against a different graph");
    }
    if (!(enc.vocab == pl.vocab)) {
      throw IncompatibleGraphError(p.string() + " uses a different token vocabulary than the classifier");
    }
    if (enc.encoder.dim() != pl.model.dim()) {
      throw IncompatibleGraphError(p.string() + " produces embeddings of a different dimension than the KGE model");
    }
    pl.encoders.emplace(hops, std::move(enc.encoder));
  }
  return pl;
}

std::vector<RankedAnswer> rank_answers(const ComplexModel& model, EntityId head,
                                       std::span<const double> question_embedding, size_t limit) {
  const auto scores = score_answers(model, head, question_embedding);
  const EntityId excluded[] = {head};
  std::vector<RankedAnswer> out;
  for (EntityId e : top_entities(scores, limit, excluded)) out.push_back(RankedAnswer{e, scores[e]});
  return out;
}

AnswerResult answer_question(const QAPipeline& pipeline, std::string_view question, std::optional<size_t> top_k) {
  AnswerResult result;
  result.head = extract_head(question, pipeline.gazetteer);
  if (result.head.ambiguous()) throw AmbiguousEntityError(result.head.surface, result.head.candidates);
  const auto tokens = tokenize(question, pipeline.vocab, result.head.span);
  result.hop = pipeline.classifier.classify(tokens);
  const auto enc = pipeline.encoders.find(result.hop.hops);
  if (enc == pipeline.encoders.end()) {
    throw ConfigError("no question encoder loaded for " + std::to_string(result.hop.hops) + "-hop questions");
  }
  result.answers = rank_answers(pipeline.model, result.head.entity(), enc->second.encode(tokens),
                                top_k.value_or(pipeline.top_k));
  return result;
}

}  // namespace kgqa
