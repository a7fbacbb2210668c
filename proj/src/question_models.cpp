#include "kgqa/question_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kgqa/checkpoint.hpp"
#include "kgqa/error.hpp"
#include "kgqa/hashing.hpp"

namespace kgqa {

// ---- vocabulary and tokenization -------------------------------------------

TokenVocabulary::TokenVocabulary() {
  add("<unk>");
  add("<ent>");
}

TokenVocabulary TokenVocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kUnknown] != "<unk>" || tokens[kEntity] != "<ent>") {
    throw FormatError("token vocabulary must start with <unk>, <ent>");
  }
  TokenVocabulary v;
  for (size_t i = 2; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) throw FormatError("duplicate token in vocabulary: " + tokens[i]);
  }
  return v;
}

uint32_t TokenVocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<uint32_t>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), idx);
  return idx;
}

uint32_t TokenVocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

uint64_t TokenVocabulary::fingerprint() const {
  Fnv1a64 h;
  for (const auto& t : tokens_) h.update_record(t);
  return h.digest();
}

std::vector<std::string> question_words(std::string_view text, std::optional<CharSpan> mention) {
  std::vector<std::string> out;
  bool placed = false;
  for (auto& w : split_words(text)) {
    const bool inside = mention && w.span.begin < mention->end && w.span.end > mention->begin;
    if (inside) {
      if (!placed) out.emplace_back("<ent>");
      placed = true;
    } else {
      out.push_back(std::move(w.text));
    }
  }
  return out;
}

std::vector<uint32_t> tokenize(std::string_view text, const TokenVocabulary& vocab,
                               std::optional<CharSpan> mention) {
  std::vector<uint32_t> ids;
  for (const auto& w : question_words(text, mention)) ids.push_back(vocab.index(w));
  return ids;
}

TokenVocabulary build_vocabulary(std::span<const std::vector<std::string>> corpus) {
  TokenVocabulary v;
  for (const auto& words : corpus) {
    for (const auto& w : words) v.add(w);
  }
  return v;
}

// ---- AdamW ------------------------------------------------------------------

AdamW::AdamW(size_t num_params, double learning_rate, double weight_decay, double beta1, double beta2,
             double epsilon)
    : lr_(learning_rate), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(epsilon), m_(num_params, 0.0),
      v_(num_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ContractError("optimizer state size does not match parameters");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    const double update = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_) + wd_ * params[i];
    params[i] = static_cast<float>(params[i] - lr_ * update);
  }
}

// ---- shared helpers ---------------------------------------------------------

namespace {

void check_tokens(std::span<const uint32_t> tokens, size_t vocab_size) {
  for (uint32_t t : tokens) {
    if (t >= vocab_size) {
      throw IndexError("token index " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab_size));
    }
  }
}

std::vector<double> mean_pool(std::span<const double> emb, size_t width, std::span<const uint32_t> tokens) {
  std::vector<double> pooled(width, 0.0);
  if (tokens.empty()) return pooled;
  for (uint32_t t : tokens) {
    const double* row = emb.data() + static_cast<size_t>(t) * width;
    for (size_t j = 0; j < width; ++j) pooled[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : pooled) x *= inv;
  return pooled;
}

void fill_uniform(std::span<double> values, Rng& rng, double bound) {
  for (auto& x : values) x = static_cast<float>(uniform_real(rng, -bound, bound));
}

}  // namespace

// ---- encoder ----------------------------------------------------------------

QuestionEncoder::QuestionEncoder(size_t vocab_size, size_t width, size_t dim)
    : vocab_size_(vocab_size), width_(width), dim_(dim) {
  if (vocab_size < 2 || width < 1 || dim < 1) throw ConfigError("invalid encoder shape");
  off_w1_ = vocab_size * width;
  off_b1_ = off_w1_ + width * width;
  off_w2_ = off_b1_ + width;
  off_b2_ = off_w2_ + 2 * dim * width;
  params_.assign(off_b2_ + 2 * dim, 0.0);
}

void QuestionEncoder::initialize(Rng& rng) {
  auto p = std::span(params_);
  fill_uniform(p.subspan(0, off_w1_), rng, 0.1);
  fill_uniform(p.subspan(off_w1_, width_ * width_), rng, std::sqrt(6.0 / static_cast<double>(2 * width_)));
  fill_uniform(p.subspan(off_w2_, 2 * dim_ * width_), rng,
               std::sqrt(6.0 / static_cast<double>(width_ + 2 * dim_)));
  std::fill(p.begin() + static_cast<std::ptrdiff_t>(off_b1_), p.begin() + static_cast<std::ptrdiff_t>(off_w2_), 0.0);
  std::fill(p.begin() + static_cast<std::ptrdiff_t>(off_b2_), p.end(), 0.0);
}

std::span<double> QuestionEncoder::output_weights() {
  return std::span(params_).subspan(off_w2_, 2 * dim_ * width_);
}

std::span<double> QuestionEncoder::output_bias() { return std::span(params_).subspan(off_b2_, 2 * dim_); }

QuestionEncoder::Activations QuestionEncoder::forward(std::span<const uint32_t> tokens) const {
  check_tokens(tokens, vocab_size_);
  Activations a;
  a.pooled = mean_pool(std::span(params_).subspan(0, off_w1_), width_, tokens);
  a.hidden_pre.assign(width_, 0.0);
  a.hidden.assign(width_, 0.0);
  for (size_t i = 0; i < width_; ++i) {
    const double* w = params_.data() + off_w1_ + i * width_;
    double s = params_[off_b1_ + i];
    for (size_t j = 0; j < width_; ++j) s += w[j] * a.pooled[j];
    a.hidden_pre[i] = s;
    a.hidden[i] = s > 0 ? s : 0.0;
  }
  a.output.assign(2 * dim_, 0.0);
  for (size_t i = 0; i < 2 * dim_; ++i) {
    const double* w = params_.data() + off_w2_ + i * width_;
    double s = params_[off_b2_ + i];
    for (size_t j = 0; j < width_; ++j) s += w[j] * a.hidden[j];
    a.output[i] = s;
  }
  return a;
}

std::vector<double> QuestionEncoder::encode(std::span<const uint32_t> tokens) const {
  return forward(tokens).output;
}

void QuestionEncoder::backward(std::span<const uint32_t> tokens, const Activations& act,
                               std::span<const double> grad_output, std::span<double> grad) const {
  if (grad.size() != params_.size() || grad_output.size() != 2 * dim_) {
    throw ContractError("encoder gradient buffer has the wrong size");
  }
  std::vector<double> g_hidden(width_, 0.0);
  for (size_t i = 0; i < 2 * dim_; ++i) {
    const double go = grad_output[i];
    if (go == 0.0) continue;
    const double* w = params_.data() + off_w2_ + i * width_;
    double* gw = grad.data() + off_w2_ + i * width_;
    for (size_t j = 0; j < width_; ++j) {
      gw[j] += go * act.hidden[j];
      g_hidden[j] += go * w[j];
    }
    grad[off_b2_ + i] += go;
  }
  std::vector<double> g_pooled(width_, 0.0);
  for (size_t i = 0; i < width_; ++i) {
    if (act.hidden_pre[i] <= 0) continue;
    const double gp = g_hidden[i];
    const double* w = params_.data() + off_w1_ + i * width_;
    double* gw = grad.data() + off_w1_ + i * width_;
    for (size_t j = 0; j < width_; ++j) {
      gw[j] += gp * act.pooled[j];
      g_pooled[j] += gp * w[j];
    }
    grad[off_b1_ + i] += gp;
  }
  if (tokens.empty()) return;
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (uint32_t t : tokens) {
    double* ge = grad.data() + static_cast<size_t>(t) * width_;
    for (size_t j = 0; j < width_; ++j) ge[j] += g_pooled[j] * inv;
  }
}

// ---- hop classifier ---------------------------------------------------------

HopClassifier::HopClassifier(size_t vocab_size, size_t width) : vocab_size_(vocab_size), width_(width) {
  if (vocab_size < 2 || width < 1) throw ConfigError("invalid classifier shape");
  off_w_ = vocab_size * width;
  off_b_ = off_w_ + 3 * width;
  params_.assign(off_b_ + 3, 0.0);
}

void HopClassifier::initialize(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  fill_uniform(std::span(params_).subspan(0, off_w_), rng, 0.1);
}

std::vector<double> HopClassifier::pooled(std::span<const uint32_t> tokens) const {
  check_tokens(tokens, vocab_size_);
  return mean_pool(std::span(params_).subspan(0, off_w_), width_, tokens);
}

std::array<double, 3> HopClassifier::logits(std::span<const double> pooled) const {
  std::array<double, 3> z{};
  for (size_t c = 0; c < 3; ++c) {
    const double* w = params_.data() + off_w_ + c * width_;
    double s = params_[off_b_ + c];
    for (size_t j = 0; j < width_; ++j) s += w[j] * pooled[j];
    z[c] = s;
  }
  return z;
}

namespace {

std::array<double, 3> softmax(const std::array<double, 3>& z) {
  const double mx = std::max({z[0], z[1], z[2]});
  std::array<double, 3> p{};
  double sum = 0.0;
  for (size_t c = 0; c < 3; ++c) sum += (p[c] = std::exp(z[c] - mx));
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

std::array<double, 3> HopClassifier::probabilities(std::span<const uint32_t> tokens) const {
  return softmax(logits(pooled(tokens)));
}

HopPrediction HopClassifier::classify(std::span<const uint32_t> tokens) const {
  HopPrediction pred;
  pred.probabilities = probabilities(tokens);
  size_t best = 0;
  for (size_t c = 1; c < 3; ++c) {
    if (pred.probabilities[c] > pred.probabilities[best]) best = c;
  }
  pred.hops = static_cast<int>(best) + 1;
  return pred;
}

double HopClassifier::loss_and_gradient(std::span<const uint32_t> tokens, int hops, std::span<double> grad,
                                        double scale) const {
  if (hops < 1 || hops > 3) throw DataError("hop label must be 1, 2 or 3");
  if (grad.size() != params_.size()) throw ContractError("classifier gradient buffer has the wrong size");
  const auto x = pooled(tokens);
  const auto p = softmax(logits(x));
  const size_t label = static_cast<size_t>(hops - 1);
  std::vector<double> g_pooled(width_, 0.0);
  for (size_t c = 0; c < 3; ++c) {
    const double gz = scale * (p[c] - (c == label ? 1.0 : 0.0));
    const double* w = params_.data() + off_w_ + c * width_;
    double* gw = grad.data() + off_w_ + c * width_;
    for (size_t j = 0; j < width_; ++j) {
      gw[j] += gz * x[j];
      g_pooled[j] += gz * w[j];
    }
    grad[off_b_ + c] += gz;
  }
  if (!tokens.empty()) {
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (uint32_t t : tokens) {
      double* ge = grad.data() + static_cast<size_t>(t) * width_;
      for (size_t j = 0; j < width_; ++j) ge[j] += g_pooled[j] * inv;
    }
  }
  return -std::log(std::max(p[label], std::numeric_limits<double>::min()));
}

double classifier_accuracy(const HopClassifier& clf, std::span<const ClassifierExample> examples) {
  if (examples.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& ex : examples) correct += clf.classify(ex.tokens).hops == ex.hops ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double classifier_loss(const HopClassifier& clf, std::span<const ClassifierExample> examples) {
  if (examples.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const auto p = clf.probabilities(ex.tokens);
    loss -= std::log(std::max(p[static_cast<size_t>(ex.hops - 1)], std::numeric_limits<double>::min()));
  }
  return loss / static_cast<double>(examples.size());
}

ClassifierTrainResult train_classifier(size_t vocab_size, std::span<const ClassifierExample> train,
                                       std::span<const ClassifierExample> valid,
                                       const ClassifierTrainConfig& config,
                                       const std::function<void(const ClassifierEpoch&)>& on_epoch) {
  if (config.epochs < 1 || config.batch_size < 1 || config.patience < 1 || !(config.learning_rate > 0)) {
    throw ConfigError("invalid classifier training configuration");
  }
  std::array<bool, 3> seen{};
  for (const auto& ex : train) {
    if (ex.hops < 1 || ex.hops > 3) throw DataError("hop label must be 1, 2 or 3");
    seen[static_cast<size_t>(ex.hops - 1)] = true;
  }
  for (size_t c = 0; c < 3; ++c) {
    if (!seen[c]) throw DataError("training data has no " + std::to_string(c + 1) + "-hop examples");
  }

  Rng rng(config.seed);
  HopClassifier clf(vocab_size, config.width);
  clf.initialize(rng);
  AdamW opt(clf.parameters().size(), config.learning_rate, config.weight_decay);

  ClassifierTrainResult result;
  std::optional<HopClassifier> best;
  double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();
  size_t stagnant = 0;

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(clf.parameters().size());

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (size_t i = start; i < stop; ++i) {
        const auto& ex = train[order[i]];
        loss_sum += clf.loss_and_gradient(ex.tokens, ex.hops, grad, scale);
      }
      opt.step(clf.parameters(), grad);
    }
    ClassifierEpoch rec{epoch, loss_sum / static_cast<double>(train.size()), classifier_accuracy(clf, train),
                        valid.empty() ? 0.0 : classifier_accuracy(clf, valid)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (valid.empty()) continue;
    const double vloss = classifier_loss(clf, valid);
    if (rec.valid_accuracy > best_acc || (rec.valid_accuracy == best_acc && vloss < best_loss)) {
      best_acc = rec.valid_accuracy;
      best_loss = vloss;
      best = clf;
      stagnant = 0;
    } else if (++stagnant >= config.patience) {
      break;
    }
  }
  result.classifier = best ? std::move(*best) : std::move(clf);
  return result;
}

// ---- persistence -------------------------------------------------------------

void save_encoder(const QuestionEncoder& enc, const TokenVocabulary& vocab, uint64_t entity_fingerprint,
                  const std::filesystem::path& path) {
  if (vocab.size() != enc.vocab_size()) throw ContractError("vocabulary size does not match encoder");
  ContainerHeader h;
  h.magic = kEncoderMagic;
  h.version = kContainerVersion;
  h.dim = static_cast<uint32_t>(enc.dim());
  h.rows_a = enc.vocab_size();
  h.rows_b = enc.width();
  h.hash_a = vocab.fingerprint();
  h.hash_b = entity_fingerprint;
  ContainerWriter w(path, h);
  w.write_floats(enc.parameters());
  w.write_strings(vocab.tokens());
  w.finish();
}

namespace {

TokenVocabulary read_vocab(ContainerReader& r, const std::filesystem::path& path) {
  auto vocab = TokenVocabulary::from_tokens(r.read_strings());
  if (vocab.size() != r.header().rows_a || vocab.fingerprint() != r.header().hash_a) {
    throw CorruptionError(path.string() + ": token vocabulary does not match its header");
  }
  return vocab;
}

}  // namespace

LoadedEncoder load_encoder(const std::filesystem::path& path) {
  ContainerReader r(path, kEncoderMagic);
  const auto& h = r.header();
  if (h.dim == 0 || h.rows_a < 2 || h.rows_b == 0) throw CorruptionError(path.string() + ": bad encoder shape");
  LoadedEncoder out;
  out.encoder = QuestionEncoder(h.rows_a, h.rows_b, h.dim);
  const auto values = r.read_floats(out.encoder.parameters().size());
  std::copy(values.begin(), values.end(), out.encoder.parameters().begin());
  out.vocab = read_vocab(r, path);
  out.entity_fingerprint = h.hash_b;
  r.expect_end();
  return out;
}

void save_classifier(const HopClassifier& clf, const TokenVocabulary& vocab, const std::filesystem::path& path) {
  if (vocab.size() != clf.vocab_size()) throw ContractError("vocabulary size does not match classifier");
  ContainerHeader h;
  h.magic = kClassifierMagic;
  h.version = kContainerVersion;
  h.dim = 3;
  h.rows_a = clf.vocab_size();
  h.rows_b = clf.width();
  h.hash_a = vocab.fingerprint();
  h.hash_b = 0;
  ContainerWriter w(path, h);
  w.write_floats(clf.parameters());
  w.write_strings(vocab.tokens());
  w.finish();
}

LoadedClassifier load_classifier(const std::filesystem::path& path) {
  ContainerReader r(path, kClassifierMagic);
  const auto& h = r.header();
  if (h.dim != 3 || h.rows_a < 2 || h.rows_b == 0) throw CorruptionError(path.string() + ": bad classifier shape");
  LoadedClassifier out;
  out.classifier = HopClassifier(h.rows_a, h.rows_b);
  const auto values = r.read_floats(out.classifier.parameters().size());
  std::copy(values.begin(), values.end(), out.classifier.parameters().begin());
  out.vocab = read_vocab(r, path);
  r.expect_end();
  return out;
}

}  // namespace kgqa
