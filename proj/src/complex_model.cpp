#include "kgqa/complex_model.hpp"

#include <cmath>
#include <string>

#include "kgqa/error.hpp"

namespace kgqa {

ComplexModel::ComplexModel(size_t num_entities, size_t num_relations, size_t dim)
    : dim_(dim),
      num_entities_(num_entities),
      num_relations_(num_relations),
      entity_re_(num_entities * dim, 0.0),
      entity_im_(num_entities * dim, 0.0),
      relation_re_(num_relations * dim, 0.0),
      relation_im_(num_relations * dim, 0.0) {
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
}

void ComplexModel::check_entity(EntityId e) const {
  if (e >= num_entities_) {
    throw IndexError("entity index " + std::to_string(e) + " out of range (" +
                     std::to_string(num_entities_) + " rows)");
  }
}

void ComplexModel::check_relation(RelationId r) const {
  if (r >= num_relations_) {
    throw IndexError("relation index " + std::to_string(r) + " out of range (" +
                     std::to_string(num_relations_) + " rows)");
  }
}

ComplexView ComplexModel::entity(EntityId e) const {
  check_entity(e);
  return {std::span(entity_re_).subspan(e * dim_, dim_), std::span(entity_im_).subspan(e * dim_, dim_)};
}

ComplexView ComplexModel::relation(RelationId r) const {
  check_relation(r);
  return {std::span(relation_re_).subspan(r * dim_, dim_),
          std::span(relation_im_).subspan(r * dim_, dim_)};
}

std::span<double> ComplexModel::entity_re(EntityId e) {
  check_entity(e);
  return std::span(entity_re_).subspan(e * dim_, dim_);
}
std::span<double> ComplexModel::entity_im(EntityId e) {
  check_entity(e);
  return std::span(entity_im_).subspan(e * dim_, dim_);
}
std::span<double> ComplexModel::relation_re(RelationId r) {
  check_relation(r);
  return std::span(relation_re_).subspan(r * dim_, dim_);
}
std::span<double> ComplexModel::relation_im(RelationId r) {
  check_relation(r);
  return std::span(relation_im_).subspan(r * dim_, dim_);
}

void ComplexModel::initialize_uniform(Rng& rng) {
  const double bound = 0.5 / std::sqrt(static_cast<double>(dim_));
  for (auto* m : {&entity_re_, &entity_im_, &relation_re_, &relation_im_}) {
    for (auto& x : *m) x = uniform_real(rng, -bound, bound);
  }
  round_to_storage();
}

void ComplexModel::round_to_storage() {
  for (auto* m : {&entity_re_, &entity_im_, &relation_re_, &relation_im_}) {
    for (auto& x : *m) x = static_cast<double>(static_cast<float>(x));
  }
}

bool ComplexModel::all_finite() const {
  for (const auto* m : {&entity_re_, &entity_im_, &relation_re_, &relation_im_}) {
    for (double x : *m) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double trilinear(ComplexView h, ComplexView r, ComplexView t) {
  const size_t d = h.re.size();
  double s = 0.0;
  for (size_t k = 0; k < d; ++k) {
    // Grouped by relation part so a purely real relation scores (h, t) and
    // (t, h) bit-identically.
    s += r.re[k] * (h.re[k] * t.re[k] + h.im[k] * t.im[k]) + r.im[k] * (h.re[k] * t.im[k] - h.im[k] * t.re[k]);
  }
  return s;
}

double score_triple(const ComplexModel& model, EntityId h, RelationId r, EntityId t) {
  return trilinear(model.entity(h), model.relation(r), model.entity(t));
}

std::vector<double> score_all_with(const ComplexModel& model, ComplexView head, ComplexView rel) {
  const size_t d = model.dim();
  if (head.re.size() != d || head.im.size() != d || rel.re.size() != d || rel.im.size() != d) {
    throw ContractError("complex vector dimension does not match model dimension " + std::to_string(d));
  }
  // phi(h, r, a) = Re((h*r) . conj(a)) = sum_k p_re a_re + p_im a_im with p = h*r.
  std::vector<double> p_re(d), p_im(d);
  for (size_t k = 0; k < d; ++k) {
    p_re[k] = head.re[k] * rel.re[k] - head.im[k] * rel.im[k];
    p_im[k] = head.re[k] * rel.im[k] + head.im[k] * rel.re[k];
  }
  const auto e_re = model.entity_re_matrix();
  const auto e_im = model.entity_im_matrix();
  std::vector<double> scores(model.num_entities());
  for (size_t a = 0; a < scores.size(); ++a) {
    const double* row_re = e_re.data() + a * d;
    const double* row_im = e_im.data() + a * d;
    double s = 0.0;
    for (size_t k = 0; k < d; ++k) s += p_re[k] * row_re[k] + p_im[k] * row_im[k];
    scores[a] = s;
  }
  return scores;
}

std::vector<double> score_all_tails(const ComplexModel& model, EntityId h, RelationId r) {
  return score_all_with(model, model.entity(h), model.relation(r));
}

std::vector<double> score_all_heads(const ComplexModel& model, RelationId r, EntityId t) {
  const auto rel = model.relation(r);
  std::vector<double> conj_im(rel.im.begin(), rel.im.end());
  for (auto& x : conj_im) x = -x;
  return score_all_with(model, model.entity(t), ComplexView{rel.re, conj_im});
}

}  // namespace kgqa
