#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kgqa/kg_store.hpp"
#include "kgqa/rng.hpp"

namespace kgqa {

// Real and imaginary parts of one complex vector.
struct ComplexView {
  std::span<const double> re;
  std::span<const double> im;
};

// ComplEx embedding tables. Each of the four matrices is row-major with `dim`
// columns. Values are held in double precision for computation; training
// rounds them to float after each update so checkpoints (float32) round-trip
// bit-exactly.
class ComplexModel {
 public:
  ComplexModel() = default;
  ComplexModel(size_t num_entities, size_t num_relations, size_t dim);

  size_t dim() const { return dim_; }
  size_t num_entities() const { return num_entities_; }
  size_t num_relations() const { return num_relations_; }

  ComplexView entity(EntityId e) const;
  ComplexView relation(RelationId r) const;

  std::span<double> entity_re(EntityId e);
  std::span<double> entity_im(EntityId e);
  std::span<double> relation_re(RelationId r);
  std::span<double> relation_im(RelationId r);

  std::span<const double> entity_re_matrix() const { return entity_re_; }
  std::span<const double> entity_im_matrix() const { return entity_im_; }
  std::span<const double> relation_re_matrix() const { return relation_re_; }
  std::span<const double> relation_im_matrix() const { return relation_im_; }
  std::span<double> entity_re_matrix() { return entity_re_; }
  std::span<double> entity_im_matrix() { return entity_im_; }
  std::span<double> relation_re_matrix() { return relation_re_; }
  std::span<double> relation_im_matrix() { return relation_im_; }

  // Uniform in [-0.5/sqrt(d), 0.5/sqrt(d)], already rounded to float.
  void initialize_uniform(Rng& rng);
  void round_to_storage();
  bool all_finite() const;

  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;

  bool operator==(const ComplexModel&) const = default;

 private:
  size_t dim_ = 0;
  size_t num_entities_ = 0;
  size_t num_relations_ = 0;
  std::vector<double> entity_re_;
  std::vector<double> entity_im_;
  std::vector<double> relation_re_;
  std::vector<double> relation_im_;
};

// Re(<h, r, conj(t)>) summed over the d components.
double trilinear(ComplexView h, ComplexView r, ComplexView t);

double score_triple(const ComplexModel& model, EntityId h, RelationId r, EntityId t);

// Scores of (head, rel, a) for every entity a. `rel` may be any complex vector
// of the model's dimension (a relation row or a question embedding).
std::vector<double> score_all_with(const ComplexModel& model, ComplexView head, ComplexView rel);

std::vector<double> score_all_tails(const ComplexModel& model, EntityId h, RelationId r);

// Scores of (a, r, t) for every a, via phi(a, r, t) = phi(t, conj(r), a).
std::vector<double> score_all_heads(const ComplexModel& model, RelationId r, EntityId t);

}  // namespace kgqa
