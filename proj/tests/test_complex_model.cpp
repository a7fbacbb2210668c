#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "kgqa/complex_model.hpp"
#include "kgqa/error.hpp"
#include "kgqa/rng.hpp"

using namespace kgqa;
using cd = std::complex<double>;

namespace {

// Re(sum_k h_k * r_k * conj(t_k)) with std::complex arithmetic.
double complex_oracle(const ComplexModel& m, EntityId h, RelationId r, EntityId t) {
  const auto eh = m.entity(h), er = m.relation(r), et = m.entity(t);
  cd sum = 0;
  for (size_t k = 0; k < m.dim(); ++k) sum += cd(eh.re[k], eh.im[k]) * cd(er.re[k], er.im[k]) * std::conj(cd(et.re[k], et.im[k]));
  return sum.real();
}

ComplexModel random_model(Rng& rng, size_t e, size_t r, size_t d, double scale = 1.0) {
  ComplexModel m(e, r, d);
  for (auto mat : {m.entity_re_matrix(), m.entity_im_matrix(), m.relation_re_matrix(), m.relation_im_matrix()}) {
    for (double& v : mat) v = uniform_real(rng, -scale, scale);
  }
  return m;
}

ComplexModel unit_model(cd h, cd r, cd t) {
  ComplexModel m(2, 1, 1);
  m.entity_re(0)[0] = h.real();
  m.entity_im(0)[0] = h.imag();
  m.entity_re(1)[0] = t.real();
  m.entity_im(1)[0] = t.imag();
  m.relation_re(0)[0] = r.real();
  m.relation_im(0)[0] = r.imag();
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

TEST(ScoreTriple, OneDimensionalWorkedExamples) {
  EXPECT_EQ(score_triple(unit_model({1, 0}, {1, 0}, {1, 0}), 0, 0, 1), 1.0);
  EXPECT_EQ(score_triple(unit_model({0, 1}, {0, 1}, {1, 0}), 0, 0, 1), -1.0);
  EXPECT_EQ(score_triple(unit_model({1, 2}, {0.5, -0.5}, {2, 0}), 0, 0, 1), 3.0);
}

TEST(ScoreTriple, MatchesComplexArithmeticOracle) {
  Rng rng(1);
  for (int draw = 0; draw < 1000; ++draw) {
    const size_t d = 1 + uniform_index(rng, 32);
    const auto m = random_model(rng, 6, 3, d);
    const auto h = static_cast<EntityId>(uniform_index(rng, 6));
    const auto r = static_cast<RelationId>(uniform_index(rng, 3));
    const auto t = static_cast<EntityId>(uniform_index(rng, 6));
    ASSERT_LE(rel_err(score_triple(m, h, r, t), complex_oracle(m, h, r, t)), 1e-9);
  }
}

TEST(ScoreTriple, OutOfRangeIndexRaises) {
  ComplexModel m(3, 2, 4);
  EXPECT_THROW(score_triple(m, 3, 0, 0), IndexError);
  EXPECT_THROW(score_triple(m, 0, 2, 0), IndexError);
  EXPECT_THROW(score_triple(m, 0, 0, 7), IndexError);
}

TEST(ScoreTriple, ConjugateRelationIdentity) {
  Rng rng(2);
  for (int draw = 0; draw < 200; ++draw) {
    auto m = random_model(rng, 5, 2, 8);
    const double forward = score_triple(m, 1, 0, 3);
    ComplexModel conj = m;
    for (double& v : conj.relation_im(0)) v = -v;
    ASSERT_LE(rel_err(forward, score_triple(conj, 3, 0, 1)), 1e-9);
  }
}

TEST(ScoreTriple, RealRelationIsSymmetricAndReducesToDistMult) {
  Rng rng(3);
  for (int draw = 0; draw < 100; ++draw) {
    auto m = random_model(rng, 4, 1, 6);
    for (double& v : m.relation_im(0)) v = 0.0;
    EXPECT_DOUBLE_EQ(score_triple(m, 0, 0, 2), score_triple(m, 2, 0, 0));
    for (EntityId e = 0; e < 4; ++e) {
      for (double& v : m.entity_im(e)) v = 0.0;
    }
    double distmult = 0.0;
    for (size_t k = 0; k < 6; ++k) distmult += m.entity(0).re[k] * m.relation(0).re[k] * m.entity(2).re[k];
    EXPECT_NEAR(score_triple(m, 0, 0, 2), distmult, 1e-12);
  }
}

TEST(ScoreAllTails, MatchesPerTripleLoop) {
  Rng rng(4);
  const auto m = random_model(rng, 50, 3, 16);
  for (EntityId h = 0; h < 50; h += 7) {
    for (RelationId r = 0; r < 3; ++r) {
      const auto tails = score_all_tails(m, h, r);
      const auto heads = score_all_heads(m, r, h);
      ASSERT_EQ(tails.size(), 50u);
      for (EntityId a = 0; a < 50; ++a) {
        EXPECT_LE(rel_err(tails[a], score_triple(m, h, r, a)), 1e-6);
        EXPECT_LE(rel_err(heads[a], score_triple(m, a, r, h)), 1e-6);
      }
    }
  }
}

TEST(ScoreAllTails, SingleEntityAndZeroEmbeddings) {
  Rng rng(5);
  const auto one = random_model(rng, 1, 1, 4);
  const auto v = score_all_tails(one, 0, 0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_DOUBLE_EQ(v[0], score_triple(one, 0, 0, 0));
  ComplexModel zero(10, 2, 4);
  for (double s : score_all_tails(zero, 3, 1)) EXPECT_EQ(s, 0.0);
}

TEST(ScoreAllWith, DimensionMismatchIsContractError) {
  ComplexModel m(3, 1, 4);
  std::vector<double> q(3, 0.0);
  EXPECT_THROW(score_all_with(m, m.entity(0), ComplexView{q, q}), ContractError);
}

TEST(Initialization, UniformRangeSeededAndFloatRepresentable) {
  Rng a(7), b(7), c(8);
  ComplexModel m1(20, 3, 16), m2(20, 3, 16), m3(20, 3, 16);
  m1.initialize_uniform(a);
  m2.initialize_uniform(b);
  m3.initialize_uniform(c);
  EXPECT_TRUE(m1 == m2);
  EXPECT_FALSE(m1 == m3);
  const double bound = 0.5 / std::sqrt(16.0);
  for (double v : m1.entity_re_matrix()) {
    EXPECT_LE(std::abs(v), bound);
    EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
  EXPECT_TRUE(m1.all_finite());
  m1.entity_im(2)[1] = std::nan("");
  EXPECT_FALSE(m1.all_finite());
}
