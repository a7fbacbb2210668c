#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "kgqa/kg_store.hpp"

namespace kgqa {

struct QAExample {
  std::string question;
  EntityId head = 0;
  std::vector<EntityId> answers;  // sorted, non-empty
  int hops = 1;
  // Generating template; empty for examples read back from TSV.
  std::string template_id;
};

struct TemplateStep {
  std::string relation;
  Direction direction = Direction::forward;

  bool operator==(const TemplateStep&) const = default;
};

struct QuestionTemplate {
  std::string id;
  std::vector<TemplateStep> steps;
  std::vector<std::string> text_forms;  // each contains "{head}" exactly once

  size_t hops() const { return steps.size(); }
  // Resolves relation names; throws GenerationError naming the template.
  Metapath resolve(const KnowledgeGraph& kg) const;
};

// `id<TAB>rel[:fwd|:inv](,rel[:fwd|:inv])*<TAB>text`; repeated ids accumulate
// text forms. Blank lines and '#' comments are skipped.
std::vector<QuestionTemplate> parse_templates(std::istream& in, const std::string& source = "<templates>");
std::vector<QuestionTemplate> parse_templates(const std::filesystem::path& path);

struct GenerateOptions {
  size_t per_template_cap = 1000;
  uint64_t seed = 0;
};

// Heads are the entities whose kind matches an entity on the source side of
// the first step; answers are everything the metapath reaches.
std::vector<QAExample> generate_qa(const KnowledgeGraph& kg, std::span<const QuestionTemplate> templates,
                                   const GenerateOptions& options);

struct QASplit {
  std::vector<QAExample> train;
  std::vector<QAExample> valid;
  std::vector<QAExample> test;
};

// Groups by (head, template id) so no group straddles two splits.
QASplit split_qa(std::span<const QAExample> examples, const SplitRatios& ratios, uint64_t seed);

// `question<TAB>head-id<TAB>answer-ids pipe-separated<TAB>hops`
void write_qa_tsv(const KnowledgeGraph& kg, std::span<const QAExample> examples,
                  const std::filesystem::path& path);
std::vector<QAExample> read_qa_tsv(const KnowledgeGraph& kg, const std::filesystem::path& path);

std::vector<QAExample> filter_hops(std::span<const QAExample> examples, int hops);

}  // namespace kgqa
