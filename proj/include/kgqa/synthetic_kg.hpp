#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kgqa/dataset_forge.hpp"
#include "kgqa/kg_store.hpp"

namespace kgqa {

// A small biomedical-flavoured graph generated from group-level rules.
//
// Four node kinds (Gene, Disease, Compound, Biological Process), each split
// into `groups_per_kind` groups of `group_size` entities. Every relation maps
// group i of its source kind onto one group of its target kind; each
// (source, target) pair inside mapped groups is an edge with probability
// `density`. "treats" is the composition of "binds" with inverse
// "upregulates" at group level.
struct SyntheticKgConfig {
  size_t groups_per_kind = 5;
  size_t group_size = 10;
  double density = 0.5;
  uint64_t seed = 13;
};

struct SyntheticKg {
  KnowledgeGraph kg;
  std::vector<QuestionTemplate> templates;
  std::string triples_tsv;
  std::string nodes_tsv;
  std::string templates_tsv;
};

SyntheticKg make_synthetic_kg(const SyntheticKgConfig& config = {});

// Writes triples.tsv, nodes.tsv and templates.tsv into `dir`.
void write_synthetic_kg(const SyntheticKg& synth, const std::filesystem::path& dir);

// Template inventory for the synthetic graph's relation names: five 1-hop,
// four 2-hop and four 3-hop templates, two or more phrasings each.
std::string synthetic_templates_tsv();

}  // namespace kgqa
