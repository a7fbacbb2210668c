#include "kgqa/synthetic_kg.hpp"

#include <array>
#include <sstream>

#include "kgqa/error.hpp"
#include "kgqa/rng.hpp"
#include "tsv.hpp"

namespace kgqa {

namespace {

struct Kind {
  const char* id_prefix;
  const char* kind;
  const char* name_prefix;
};

constexpr std::array<Kind, 4> kKinds{{
    {"Gene", "Gene", "gene"},
    {"Disease", "Disease", "disease"},
    {"Compound", "Compound", "compound"},
    {"BiologicalProcess", "Biological Process", "process"},
}};

enum KindIndex : size_t { kGene = 0, kDisease = 1, kCompound = 2, kProcess = 3 };

struct RelationRule {
  const char* id;
  size_t source;
  size_t target;
  size_t shift;  // source group g maps to target group (g + shift) mod groups
};

// CtD composes CbG (shift 0) with inverse DuG (shift 3): g -> g -> g - 3 = g + 2 (mod 5).
constexpr std::array<RelationRule, 5> kRules{{
    {"GiG", kGene, kGene, 1},
    {"GpBP", kGene, kProcess, 2},
    {"DuG", kDisease, kGene, 3},
    {"CbG", kCompound, kGene, 0},
    {"CtD", kCompound, kDisease, 2},
}};

// A few recognisable names, the rest are "<kind> <n>".
std::string entity_name(size_t kind, size_t n) {
  if (kind == kProcess && n == 0) return "lung vasculature development";
  if (kind == kDisease && n == 0) return "breast cancer";
  if (kind == kDisease && n == 1) return "pancreatic cancer";
  if (kind == kGene && n == 0) return "IL-6";
  return std::string(kKinds[kind].name_prefix) + " " + std::to_string(n);
}

std::string entity_id(size_t kind, size_t n) {
  return std::string(kKinds[kind].id_prefix) + "::" + std::to_string(n);
}

}  // namespace

std::string synthetic_templates_tsv() {
  return R"(# id	metapath	text
q1_binds	CbG:fwd	which genes does {head} bind?
q1_binds	CbG:fwd	list the genes bound by {head}
q1_bound_by	CbG:inv	which compounds bind {head}?
q1_bound_by	CbG:inv	what drugs target the gene {head}?
q1_treats	CtD:fwd	what diseases does {head} treat?
q1_treats	CtD:fwd	which conditions are treated with {head}?
q1_treated_by	CtD:inv	which compounds treat {head}?
q1_treated_by	CtD:inv	what drugs are used against {head}?
q1_members	GpBP:inv	which genes participate in {head}?
q1_members	GpBP:inv	list genes involved in {head}
q2_bound_processes	CbG:fwd,GpBP:fwd	which biological processes involve genes bound by {head}?
q2_bound_processes	CbG:fwd,GpBP:fwd	in what processes do the targets of {head} take part?
q2_partners_of_upregulated	DuG:fwd,GiG:fwd	which genes interact with genes upregulated by {head}?
q2_partners_of_upregulated	DuG:fwd,GiG:fwd	name interaction partners of genes that {head} upregulates
q2_process_diseases	GpBP:inv,DuG:inv	list diseases that upregulate genes involved in {head}
q2_process_diseases	GpBP:inv,DuG:inv	what diseases upregulate the genes participating in {head}?
q2_treated_upregulated	CtD:fwd,DuG:fwd	which genes are upregulated by diseases treated by {head}?
q2_treated_upregulated	CtD:fwd,DuG:fwd	genes upregulated by conditions that {head} treats
q3_process_partner_diseases	GpBP:inv,GiG:fwd,DuG:inv	list all diseases that upregulate the gene which interact with gene involved in {head}
q3_process_partner_diseases	GpBP:inv,GiG:fwd,DuG:inv	what diseases upregulate interaction partners of genes participating in {head}?
q3_target_partner_processes	CbG:fwd,GiG:fwd,GpBP:fwd	which processes involve genes that interact with genes bound by {head}?
q3_target_partner_processes	CbG:fwd,GiG:fwd,GpBP:fwd	name processes of interaction partners of the targets of {head}
q3_upregulated_binders_treat	DuG:fwd,CbG:inv,CtD:fwd	which diseases are treated by compounds that bind genes upregulated by {head}?
q3_upregulated_binders_treat	DuG:fwd,CbG:inv,CtD:fwd	what conditions do drugs binding the genes {head} upregulates treat?
q3_treated_upregulated_processes	CtD:fwd,DuG:fwd,GpBP:fwd	which processes involve genes upregulated by diseases that {head} treats?
q3_treated_upregulated_processes	CtD:fwd,DuG:fwd,GpBP:fwd	in what processes are genes upregulated by conditions treated with {head} involved?
)";
}

SyntheticKg make_synthetic_kg(const SyntheticKgConfig& config) {
  if (config.groups_per_kind < 1 || config.group_size < 1) throw ConfigError("empty synthetic graph");
  if (!(config.density > 0 && config.density <= 1)) throw ConfigError("density must be in (0, 1]");
  Rng rng(config.seed);
  const size_t groups = config.groups_per_kind;
  const size_t per_kind = groups * config.group_size;

  std::ostringstream nodes, triples;
  for (size_t k = 0; k < kKinds.size(); ++k) {
    for (size_t n = 0; n < per_kind; ++n) {
      nodes << entity_id(k, n) << '\t' << entity_name(k, n) << '\t' << kKinds[k].kind << '\n';
    }
  }
  // Entity n of a kind belongs to group n % groups.
  for (const auto& rule : kRules) {
    for (size_t s = 0; s < per_kind; ++s) {
      const size_t target_group = (s % groups + rule.shift) % groups;
      for (size_t t = target_group; t < per_kind; t += groups) {
        if (rule.source == rule.target && s == t) continue;
        if (uniform_unit(rng) < config.density) {
          triples << entity_id(rule.source, s) << '\t' << rule.id << '\t' << entity_id(rule.target, t) << '\n';
        }
      }
    }
  }

  SyntheticKg out;
  out.nodes_tsv = nodes.str();
  out.triples_tsv = triples.str();
  out.templates_tsv = synthetic_templates_tsv();

  KnowledgeGraphBuilder b;
  std::istringstream tin(out.triples_tsv);
  std::string line;
  while (std::getline(tin, line)) {
    const auto f = detail::split_on(line, '\t');
    b.add_triple(f[0], f[1], f[2]);
  }
  std::istringstream nin(out.nodes_tsv);
  while (std::getline(nin, line)) {
    const auto f = detail::split_on(line, '\t');
    b.set_meta(f[0], NodeMeta{std::string(f[1]), std::string(f[2]), {}});
  }
  out.kg = std::move(b).build();
  std::istringstream tpl(out.templates_tsv);
  out.templates = parse_templates(tpl, "<synthetic templates>");
  return out;
}

void write_synthetic_kg(const SyntheticKg& synth, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : {std::pair{"triples.tsv", &synth.triples_tsv},
                                      std::pair{"nodes.tsv", &synth.nodes_tsv},
                                      std::pair{"templates.tsv", &synth.templates_tsv}}) {
    auto out = detail::open_for_write(dir / name);
    out << *content;
    if (!out) throw WriteError("failed writing " + (dir / name).string());
  }
}

}  // namespace kgqa
