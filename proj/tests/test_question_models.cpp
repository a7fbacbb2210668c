#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gradient_check.hpp"
#include "kgqa/error.hpp"
#include "kgqa/question_models.hpp"
#include "kgqa/rng.hpp"
#include "test_support.hpp"

using namespace kgqa;
using namespace kgqa::testing;

namespace {

TokenVocabulary vocab_of(const std::vector<std::string>& words) {
  TokenVocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

std::vector<ClassifierExample> keyword_examples(size_t per_class) {
  std::vector<ClassifierExample> out;
  for (size_t i = 0; i < per_class; ++i) {
    for (int c = 1; c <= 3; ++c) {
      // Token 1 + c is the class keyword; 5 and 6 are shared filler.
      out.push_back({{5, static_cast<uint32_t>(1 + c), 6}, c});
    }
  }
  return out;
}

}  // namespace

TEST(Vocabulary, ReservesUnknownAndEntitySlots) {
  TokenVocabulary v;
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.index("<unk>"), TokenVocabulary::kUnknown);
  EXPECT_EQ(v.index("<ent>"), TokenVocabulary::kEntity);
  EXPECT_EQ(v.add("gene"), 2u);
  EXPECT_EQ(v.add("gene"), 2u);
  EXPECT_EQ(v.index("never seen"), TokenVocabulary::kUnknown);
}

TEST(Vocabulary, FromTokensRoundTripsAndValidates) {
  const auto v = vocab_of({"a", "b"});
  EXPECT_EQ(TokenVocabulary::from_tokens(v.tokens()), v);
  EXPECT_EQ(TokenVocabulary::from_tokens(v.tokens()).fingerprint(), v.fingerprint());
  EXPECT_THROW(TokenVocabulary::from_tokens({"a", "b"}), FormatError);
  EXPECT_THROW(TokenVocabulary::from_tokens({"<unk>", "<ent>", "a", "a"}), FormatError);
  EXPECT_NE(vocab_of({"a", "b"}).fingerprint(), vocab_of({"b", "a"}).fingerprint());
}

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(question_words("What genes BIND aspirin?"),
            (std::vector<std::string>{"what", "genes", "bind", "aspirin"}));
  EXPECT_TRUE(question_words("").empty());
  EXPECT_EQ(question_words("IL-6 related"), (std::vector<std::string>{"il-6", "related"}));
  EXPECT_EQ(question_words("a--b, -x- (y)"), (std::vector<std::string>{"a", "b", "x", "y"}));
}

TEST(Tokenize, MapsThroughVocabularyWithUnknownFallback) {
  const auto v = vocab_of({"what", "genes", "bind", "aspirin"});
  EXPECT_EQ(tokenize("What genes BIND aspirin?", v), (std::vector<uint32_t>{2, 3, 4, 5}));
  EXPECT_EQ(tokenize("what binds", v), (std::vector<uint32_t>{2, TokenVocabulary::kUnknown}));
  EXPECT_TRUE(tokenize("", v).empty());
}

TEST(Tokenize, MentionBecomesOnePlaceholder) {
  const std::string q = "which genes bind lung vasculature development?";
  const size_t b = q.find("lung");
  const CharSpan span{b, b + std::string("lung vasculature development").size()};
  EXPECT_EQ(question_words(q, span), (std::vector<std::string>{"which", "genes", "bind", "<ent>"}));
  const auto v = vocab_of({"which", "genes", "bind"});
  EXPECT_EQ(tokenize(q, v, span), (std::vector<uint32_t>{2, 3, 4, TokenVocabulary::kEntity}));
}

TEST(BuildVocabulary, FirstAppearanceOrder) {
  const std::vector<std::vector<std::string>> corpus = {{"b", "a"}, {"c", "a", "<ent>"}};
  const auto v = build_vocabulary(corpus);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "<ent>", "b", "a", "c"}));
}

TEST(Encoder, OutputHasLength2dForAnyInput) {
  QuestionEncoder enc(10, 6, 4);
  Rng rng(1);
  enc.initialize(rng);
  for (size_t n = 0; n < 6; ++n) {
    std::vector<uint32_t> toks;
    for (size_t i = 0; i < n; ++i) toks.push_back(static_cast<uint32_t>(uniform_index(rng, 10)));
    EXPECT_EQ(enc.encode(toks).size(), 8u);
  }
}

TEST(Encoder, ZeroOutputLayerGivesZeroEmbedding) {
  QuestionEncoder enc(10, 6, 4);
  Rng rng(2);
  enc.initialize(rng);
  std::fill(enc.output_weights().begin(), enc.output_weights().end(), 0.0);
  std::fill(enc.output_bias().begin(), enc.output_bias().end(), 0.0);
  for (double x : enc.encode(std::vector<uint32_t>{2, 3, 9})) EXPECT_EQ(x, 0.0);
}

TEST(Encoder, DeterministicAndPermutationInvariant) {
  QuestionEncoder enc(20, 8, 5);
  Rng rng(3);
  enc.initialize(rng);
  std::vector<uint32_t> toks = {4, 7, 7, 12, 1, 19};
  const auto base = enc.encode(toks);
  EXPECT_EQ(enc.encode(toks), base);
  for (int trial = 0; trial < 20; ++trial) {
    shuffle(toks, rng);
    const auto perm = enc.encode(toks);
    for (size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(perm[i], base[i], 1e-12);
  }
}

TEST(Encoder, OutOfRangeTokenIsIndexError) {
  QuestionEncoder enc(5, 3, 2);
  EXPECT_THROW(enc.encode(std::vector<uint32_t>{5}), IndexError);
  EXPECT_THROW(QuestionEncoder(1, 3, 2), ConfigError);
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  // Seed 2 draws a coordinate with |g| ~ 2e-7, where central-difference
  // roundoff alone is ~1e-4 relative at step 1e-5.
  for (uint64_t seed : {1, 3, 4}) {
    const auto report = check_encoder_gradient(seed, 150);
    EXPECT_EQ(report.coordinates, 150u);
    EXPECT_LE(report.worst, 1e-4) << "seed " << seed;
  }
}

TEST(Classifier, ZeroOutputLayerIsUniformAndPicksOneHop) {
  HopClassifier clf(8, 4);
  Rng rng(4);
  clf.initialize(rng);
  const auto pred = clf.classify(std::vector<uint32_t>{2, 3});
  for (double p : pred.probabilities) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(pred.hops, 1);
}

TEST(Classifier, ProbabilitiesSumToOne) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    HopClassifier clf(12, 5);
    for (auto& x : clf.parameters()) x = uniform_real(rng, -20, 20);
    std::vector<uint32_t> toks;
    const size_t n = uniform_index(rng, 6);
    for (size_t i = 0; i < n; ++i) toks.push_back(static_cast<uint32_t>(uniform_index(rng, 12)));
    const auto p = clf.probabilities(toks);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-6);
    for (double x : p) EXPECT_GE(x, 0.0);
  }
}

TEST(Classifier, GradientMatchesFiniteDifferences) {
  for (uint64_t seed : {1, 2, 3}) {
    const auto report = check_classifier_gradient(seed, 150);
    EXPECT_EQ(report.coordinates, 150u);
    EXPECT_LE(report.worst, 1e-4) << "seed " << seed;
  }
}

TEST(Classifier, BadLabelIsDataError) {
  HopClassifier clf(4, 2);
  std::vector<double> grad(clf.parameters().size());
  EXPECT_THROW(clf.loss_and_gradient(std::vector<uint32_t>{2}, 4, grad), DataError);
}

TEST(TrainClassifier, SeparableDataReachesPerfectAccuracy) {
  const auto train = keyword_examples(20);
  const auto valid = keyword_examples(3);
  ClassifierTrainConfig cfg;
  cfg.width = 16;
  cfg.epochs = 40;
  cfg.learning_rate = 0.05;
  const auto result = train_classifier(7, train, valid, cfg);
  EXPECT_DOUBLE_EQ(classifier_accuracy(result.classifier, train), 1.0);
  EXPECT_DOUBLE_EQ(classifier_accuracy(result.classifier, valid), 1.0);
  ASSERT_FALSE(result.history.empty());
  EXPECT_EQ(result.history.front().epoch, 1u);
}

TEST(TrainClassifier, LossDropsDuringFirstEpoch) {
  const auto train = keyword_examples(20);
  ClassifierTrainConfig cfg;
  cfg.width = 16;
  cfg.epochs = 1;
  cfg.learning_rate = 0.05;
  const auto result = train_classifier(7, train, {}, cfg);
  EXPECT_LT(classifier_loss(result.classifier, train), std::log(3.0));
}

TEST(TrainClassifier, MissingClassIsDataError) {
  std::vector<ClassifierExample> train = {{{2}, 1}, {{3}, 2}, {{2}, 1}};
  EXPECT_THROW(train_classifier(5, train, {}, ClassifierTrainConfig{}), DataError);
}

TEST(TrainClassifier, SameSeedSameClassifier) {
  const auto train = keyword_examples(5);
  ClassifierTrainConfig cfg;
  cfg.width = 8;
  cfg.epochs = 3;
  const auto a = train_classifier(7, train, {}, cfg);
  const auto b = train_classifier(7, train, {}, cfg);
  EXPECT_EQ(a.classifier, b.classifier);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  const double lr = 0.01, wd = 0.1;
  AdamW opt(3, lr, wd);
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> g = {0.3, -4.0, 0.0};
  const auto before = p;
  opt.step(p, g);
  for (size_t i = 0; i < p.size(); ++i) {
    // Bias correction makes the first moment ratio g / (|g| + eps).
    const double expected = before[i] - lr * (g[i] / (std::abs(g[i]) + 1e-8) + wd * before[i]);
    EXPECT_EQ(p[i], static_cast<double>(static_cast<float>(expected)));
  }
}

TEST(AdamW, MinimizesQuadratic) {
  AdamW opt(2, 0.05, 0.0);
  std::vector<double> p = {3.0, -2.0};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g = {2 * (p[0] - 1.0), 2 * (p[1] + 0.5)};
    opt.step(p, g);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-2);
  EXPECT_NEAR(p[1], -0.5, 1e-2);
}

TEST(AdamW, SizeMismatchIsContractError) {
  AdamW opt(2, 0.1, 0.0);
  std::vector<double> p = {1.0};
  EXPECT_THROW(opt.step(p, std::vector<double>{1.0}), ContractError);
}
