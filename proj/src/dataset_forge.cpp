#include "kgqa/dataset_forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "kgqa/error.hpp"
#include "kgqa/rng.hpp"
#include "tsv.hpp"

namespace kgqa {

namespace {

constexpr std::string_view kPlaceholder = "{head}";

size_t count_placeholders(std::string_view text) {
  size_t n = 0;
  for (size_t pos = text.find(kPlaceholder); pos != std::string_view::npos;
       pos = text.find(kPlaceholder, pos + kPlaceholder.size())) {
    ++n;
  }
  return n;
}

TemplateStep parse_step(std::string_view token, const std::string& where) {
  if (token.empty()) throw ParseError(where + ": empty metapath step");
  TemplateStep step;
  const auto colon = token.rfind(':');
  if (colon == std::string_view::npos) {
    step.relation = std::string(token);
    return step;
  }
  const auto tag = token.substr(colon + 1);
  if (tag == "fwd") {
    step.direction = Direction::forward;
  } else if (tag == "inv") {
    step.direction = Direction::inverse;
  } else {
    throw ParseError(where + ": unknown direction tag \"" + std::string(tag) + "\"");
  }
  step.relation = std::string(token.substr(0, colon));
  if (step.relation.empty()) throw ParseError(where + ": empty relation name");
  return step;
}

std::string fill(const std::string& form, const std::string& name) {
  std::string out = form;
  out.replace(out.find(kPlaceholder), kPlaceholder.size(), name);
  return out;
}

}  // namespace

Metapath QuestionTemplate::resolve(const KnowledgeGraph& kg) const {
  Metapath path;
  for (const auto& s : steps) {
    const auto r = kg.relations().find(s.relation);
    if (!r) throw GenerationError("template " + id + ": relation \"" + s.relation + "\" is not in the graph");
    path.steps.push_back(MetapathStep{*r, s.direction});
  }
  return path;
}

std::vector<QuestionTemplate> parse_templates(std::istream& in, const std::string& source) {
  std::vector<QuestionTemplate> out;
  std::map<std::string, size_t> by_id;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto f = detail::split_on(line, '\t');
    if (f.size() != 3) throw ParseError(where + ": expected id<TAB>metapath<TAB>text");
    if (f[0].empty()) throw ParseError(where + ": empty template id");
    std::vector<TemplateStep> steps;
    for (auto tok : detail::split_on(f[1], ',')) steps.push_back(parse_step(tok, where));
    if (steps.empty() || steps.size() > 3) throw ParseError(where + ": metapath must have 1 to 3 steps");
    if (count_placeholders(f[2]) != 1) throw ParseError(where + ": text form must contain {head} exactly once");

    const std::string id(f[0]);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      by_id.emplace(id, out.size());
      out.push_back(QuestionTemplate{id, std::move(steps), {std::string(f[2])}});
    } else {
      auto& t = out[it->second];
      if (t.steps != steps) throw ParseError(where + ": template " + id + " redefined with a different metapath");
      t.text_forms.emplace_back(f[2]);
    }
  }
  return out;
}

std::vector<QuestionTemplate> parse_templates(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return parse_templates(in, path.string());
}

std::vector<QAExample> generate_qa(const KnowledgeGraph& kg, std::span<const QuestionTemplate> templates,
                                   const GenerateOptions& options) {
  if (templates.empty()) throw ContractError("no question templates given");
  if (options.per_template_cap < 1) throw ConfigError("per-template cap must be >= 1");
  std::vector<QAExample> out;
  for (size_t ti = 0; ti < templates.size(); ++ti) {
    const auto& tpl = templates[ti];
    const Metapath path = tpl.resolve(kg);

    // Start kinds are read off the entities on the source side of step one.
    std::set<std::string> start_kinds;
    const auto& first = path.steps.front();
    for (const auto& t : kg.triples()) {
      if (t.relation != first.relation) continue;
      start_kinds.insert(kg.meta(first.direction == Direction::forward ? t.head : t.tail).kind);
    }

    struct Candidate {
      EntityId head;
      std::vector<EntityId> answers;
    };
    std::vector<Candidate> candidates;
    for (EntityId e = 0; e < kg.num_entities(); ++e) {
      if (!start_kinds.contains(kg.meta(e).kind)) continue;
      auto answers = traverse_metapath(kg, e, path);
      if (answers.empty()) continue;
      candidates.push_back(Candidate{e, std::move(answers)});
    }
    if (candidates.size() > options.per_template_cap) {
      // Per-template stream so one template's cap does not shift another's sample.
      Rng rng(options.seed ^ (0x9e3779b97f4a7c15ULL * (ti + 1)));
      shuffle(candidates, rng);
      candidates.resize(options.per_template_cap);
      std::sort(candidates.begin(), candidates.end(),
                [](const Candidate& a, const Candidate& b) { return a.head < b.head; });
    }
    for (size_t i = 0; i < candidates.size(); ++i) {
      auto& c = candidates[i];
      const auto& form = tpl.text_forms[i % tpl.text_forms.size()];
      out.push_back(QAExample{fill(form, display_name(kg, c.head)), c.head, std::move(c.answers),
                              static_cast<int>(tpl.hops()), tpl.id});
    }
  }
  return out;
}

QASplit split_qa(std::span<const QAExample> examples, const SplitRatios& ratios, uint64_t seed) {
  ratios.validate();
  std::map<std::pair<EntityId, std::string>, size_t> group_of;
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < examples.size(); ++i) {
    auto key = std::make_pair(examples[i].head, examples[i].template_id);
    auto [it, inserted] = group_of.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  Rng rng(seed);
  shuffle(groups, rng);

  const double n = static_cast<double>(examples.size());
  const auto n_train = static_cast<size_t>(std::llround(ratios.train * n));
  const auto n_valid = static_cast<size_t>(std::llround(ratios.valid * n));
  QASplit split;
  for (const auto& g : groups) {
    std::vector<QAExample>* dst = &split.test;
    if (split.train.size() + g.size() <= n_train) {
      dst = &split.train;
    } else if (split.valid.size() + g.size() <= n_valid) {
      dst = &split.valid;
    }
    for (size_t i : g) dst->push_back(examples[i]);
  }
  return split;
}

void write_qa_tsv(const KnowledgeGraph& kg, std::span<const QAExample> examples,
                  const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  for (const auto& ex : examples) {
    if (ex.question.find_first_of("\t\n") != std::string::npos) {
      throw DataError("question text contains a tab or newline: " + ex.question);
    }
    out << ex.question << '\t' << kg.entities().at(ex.head) << '\t';
    for (size_t i = 0; i < ex.answers.size(); ++i) {
      if (i) out << '|';
      out << kg.entities().at(ex.answers[i]);
    }
    out << '\t' << ex.hops << '\n';
  }
  if (!out) throw WriteError("failed writing " + path.string());
}

std::vector<QAExample> read_qa_tsv(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<QAExample> out;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line.empty()) continue;
    const std::string where = detail::where(path, line_no);
    const auto f = detail::split_on(line, '\t');
    if (f.size() != 4) throw ParseError(where + ": expected question<TAB>head<TAB>answers<TAB>hops");
    QAExample ex;
    ex.question = std::string(f[0]);
    const auto head = kg.entities().find(f[1]);
    if (!head) throw DataError(where + ": unknown head id " + std::string(f[1]));
    ex.head = *head;
    for (auto a : detail::split_on(f[2], '|')) {
      const auto id = kg.entities().find(a);
      if (!id) throw DataError(where + ": unknown answer id " + std::string(a));
      ex.answers.push_back(*id);
    }
    std::sort(ex.answers.begin(), ex.answers.end());
    ex.answers.erase(std::unique(ex.answers.begin(), ex.answers.end()), ex.answers.end());
    if (f[3] == "1" || f[3] == "2" || f[3] == "3") {
      ex.hops = f[3][0] - '0';
    } else {
      throw ParseError(where + ": hops must be 1, 2 or 3");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QAExample> filter_hops(std::span<const QAExample> examples, int hops) {
  std::vector<QAExample> out;
  for (const auto& ex : examples) {
    if (ex.hops == hops) out.push_back(ex);
  }
  return out;
}

}  // namespace kgqa
