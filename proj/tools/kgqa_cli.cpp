// kgqa: command-line driver for every pipeline stage.
//
// Artifacts live in a work directory (default ./kgqa-work):
//   triples.tsv nodes.tsv templates.tsv   input graph and question templates
//   split/{train,valid,test}.tsv          link-prediction split
//   kge.bin                               ComplEx checkpoint
//   qa/{all,train,valid,test}.tsv         generated questions
//   classifier.bin encoder_{1,2,3}.bin    question models
//
// Settings resolve as flag > environment (KGQA_<KEY>) > config file (JSON,
// --config or KGQA_CONFIG) > default.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgqa/api_service.hpp"
#include "kgqa/checkpoint.hpp"
#include "kgqa/dataset_forge.hpp"
#include "kgqa/entity_matcher.hpp"
#include "kgqa/error.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/kge_training.hpp"
#include "kgqa/qa_engine.hpp"
#include "kgqa/question_models.hpp"
#include "kgqa/rank_eval.hpp"
#include "kgqa/synthetic_kg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kgqa;

namespace {

std::string env_name(const std::string& key) {
  std::string out = "KGQA_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

class Settings {
 public:
  void load_config(const std::optional<std::string>& flag) {
    std::optional<std::string> path = flag;
    if (!path) path = env_("KGQA_CONFIG");
    if (!path) return;
    std::ifstream in(*path);
    if (!in) throw MissingFileError("cannot open config " + *path);
    try {
      config_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("invalid JSON in " + *path + ": " + e.what());
    }
    if (!config_.is_object()) throw ConfigError(*path + ": top level must be an object");
    config_dir_ = fs::path(*path).parent_path();
  }

  template <class T>
  T get(const std::string& key, const std::optional<T>& flag, T fallback) const {
    if (flag) return *flag;
    if (auto v = env_(env_name(key))) return parse<T>(*v, env_name(key));
    if (config_.contains(key)) {
      try {
        return config_[key].get<T>();
      } catch (const json::exception& e) {
        throw ConfigError("config key \"" + key + "\": " + e.what());
      }
    }
    return fallback;
  }

  std::optional<fs::path> path(const std::string& key, const std::optional<std::string>& flag) const {
    if (flag) return fs::path(*flag);
    if (auto v = env_(env_name(key))) return fs::path(*v);
    if (config_.contains(key)) {
      fs::path p(config_[key].get<std::string>());
      return p.is_absolute() ? p : config_dir_ / p;
    }
    return std::nullopt;
  }

  fs::path path_or(const std::string& key, const std::optional<std::string>& flag, const fs::path& fallback) const {
    return path(key, flag).value_or(fallback);
  }

 private:
  template <class T>
  static T parse(const std::string& text, const std::string& what) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else {
      std::istringstream in(text);
      T value{};
      in >> value;
      if (!in || !in.eof()) throw ConfigError(what + ": cannot parse \"" + text + "\"");
      return value;
    }
  }

  EnvLookup env_ = process_env();
  json config_ = json::object();
  fs::path config_dir_;
};

struct Common {
  std::optional<std::string> config;
  std::optional<std::string> work_dir;
  std::optional<std::string> triples;
  std::optional<std::string> nodes;
  std::optional<std::string> synonyms;
};

struct Context {
  Settings settings;
  fs::path work;
  Common flags;

  fs::path triples() const { return settings.path_or("triples", flags.triples, work / "triples.tsv"); }
  std::optional<fs::path> nodes() const {
    if (auto p = settings.path("nodes", flags.nodes)) return p;
    if (fs::exists(work / "nodes.tsv")) return work / "nodes.tsv";
    return std::nullopt;
  }
  std::optional<fs::path> synonyms() const {
    if (auto p = settings.path("synonyms", flags.synonyms)) return p;
    if (fs::exists(work / "synonyms.tsv")) return work / "synonyms.tsv";
    return std::nullopt;
  }
  KnowledgeGraph graph() const { return load_kg(triples(), nodes()); }
  fs::path kge() const { return settings.path_or("kge", std::nullopt, work / "kge.bin"); }
  fs::path classifier() const { return settings.path_or("classifier", std::nullopt, work / "classifier.bin"); }
  fs::path encoder(int hops) const {
    return settings.path_or("encoder_" + std::to_string(hops), std::nullopt,
                            work / ("encoder_" + std::to_string(hops) + ".bin"));
  }
  fs::path qa_dir() const { return settings.path_or("qa_dir", std::nullopt, work / "qa"); }
  fs::path split_dir() const { return work / "split"; }

  PipelinePaths pipeline_paths() const {
    PipelinePaths p;
    p.triples = triples();
    p.nodes = nodes();
    p.synonyms = synonyms();
    p.kge = kge();
    p.classifier = classifier();
    for (int h = 1; h <= 3; ++h) p.encoders[h] = encoder(h);
    return p;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw WriteError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fixed(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

// ingest

struct IngestArgs {
  bool json = false;
};

int run_ingest(const Context& ctx, const IngestArgs& a) {
  const auto kg = ctx.graph();
  Gazetteer gaz = Gazetteer::build(kg);
  size_t unknown_synonyms = 0;
  if (auto syn = ctx.synonyms()) unknown_synonyms = gaz.add_synonyms_tsv(kg, *syn);
  const auto& s = kg.summary();
  if (a.json) {
    std::cout << json{{"entities", s.entities},
                      {"relations", s.relations},
                      {"triples", s.triples},
                      {"duplicates_dropped", s.duplicates_dropped},
                      {"nodes_with_metadata", s.nodes_with_metadata},
                      {"surface_forms", gaz.num_forms()},
                      {"unnamed_entities", gaz.skipped_unnamed()},
                      {"unknown_synonym_ids", unknown_synonyms}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << s.to_text() << "surface_forms: " << gaz.num_forms() << "\n"
              << "unnamed_entities: " << gaz.skipped_unnamed() << "\n";
    if (unknown_synonyms) std::cout << "unknown_synonym_ids: " << unknown_synonyms << "\n";
  }
  return 0;
}

// synth-kg

struct SynthArgs {
  std::optional<std::string> out;
  std::optional<uint64_t> seed;
  std::optional<size_t> groups;
  std::optional<size_t> group_size;
  std::optional<double> density;
};

int run_synth(const Context& ctx, const SynthArgs& a) {
  SyntheticKgConfig c;
  c.seed = ctx.settings.get<uint64_t>("seed", a.seed, c.seed);
  c.groups_per_kind = ctx.settings.get<size_t>("groups", a.groups, c.groups_per_kind);
  c.group_size = ctx.settings.get<size_t>("group_size", a.group_size, c.group_size);
  c.density = ctx.settings.get<double>("density", a.density, c.density);
  const fs::path out = a.out ? fs::path(*a.out) : ctx.work;
  const auto synth = make_synthetic_kg(c);
  write_synthetic_kg(synth, out);
  std::cout << "wrote " << (out / "triples.tsv").string() << ", nodes.tsv, templates.tsv\n"
            << synth.kg.summary().to_text();
  return 0;
}

// train-kge / eval-kge

struct TrainKgeArgs {
  std::optional<size_t> dim, epochs, batch_size, negatives, patience, eval_every;
  std::optional<double> lr, l2;
  std::optional<uint64_t> seed;
  bool quiet = false;
};

int run_train_kge(const Context& ctx, const TrainKgeArgs& a) {
  const auto kg = ctx.graph();
  const auto& s = ctx.settings;
  TrainConfig c;
  c.dim = s.get<size_t>("dim", a.dim, c.dim);
  c.epochs = s.get<size_t>("epochs", a.epochs, c.epochs);
  c.batch_size = s.get<size_t>("batch_size", a.batch_size, c.batch_size);
  c.negatives_per_positive = s.get<size_t>("negatives", a.negatives, c.negatives_per_positive);
  c.patience = s.get<size_t>("patience", a.patience, c.patience);
  c.eval_every = s.get<size_t>("eval_every", a.eval_every, c.eval_every);
  c.learning_rate = s.get<double>("lr", a.lr, c.learning_rate);
  c.l2_weight = s.get<double>("l2", a.l2, c.l2_weight);
  c.seed = s.get<uint64_t>("seed", a.seed, c.seed);

  const auto split = split_triples(kg, SplitRatios{}, c.seed);
  ensure_dir(ctx.split_dir());
  write_triples_tsv(kg, split.train, ctx.split_dir() / "train.tsv");
  write_triples_tsv(kg, split.valid, ctx.split_dir() / "valid.tsv");
  write_triples_tsv(kg, split.test, ctx.split_dir() / "test.tsv");

  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [](size_t epoch, double loss, const std::optional<EvaluationPoint>& p) {
      std::cerr << "epoch " << epoch << " loss " << fixed(loss, 5);
      if (p) std::cerr << " valid_hits@10 " << fixed(p->metric);
      std::cerr << "\n";
    };
  }
  const auto result = train_kge(kg, split.train, split.valid, c, hooks);
  save_checkpoint(result.model, kg, ctx.kge());
  std::cout << "train/valid/test triples: " << split.train.size() << "/" << split.valid.size() << "/"
            << split.test.size() << "\n"
            << "epochs run: " << result.history.epochs_run << "\n"
            << "best epoch: " << result.history.best_epoch << "\n"
            << "stopped early: " << (result.history.stopped_early ? "yes" : "no") << "\n"
            << "checkpoint: " << ctx.kge().string() << "\n";
  return 0;
}

struct EvalKgeArgs {
  std::string split = "test";
  std::optional<std::string> eval_triples;
  bool raw = false;
  bool json = false;
};

int run_eval_kge(const Context& ctx, const EvalKgeArgs& a) {
  const auto kg = ctx.graph();
  const auto model = load_checkpoint(ctx.kge(), kg);
  const fs::path file = a.eval_triples ? fs::path(*a.eval_triples) : ctx.split_dir() / (a.split + ".tsv");
  const auto triples = read_triples_tsv(kg, file);
  if (triples.empty()) throw DataError("no triples to evaluate in " + file.string());
  KnownTriples known(kg.triples());
  LinkPredictionOptions o;
  o.filtered = !a.raw;
  const auto report = evaluate_link_prediction(model, triples, known, o);
  std::cout << (a.json ? report.to_json().dump(2) + "\n" : report.to_text());
  return 0;
}

// gen-qa

struct GenQaArgs {
  std::optional<std::string> templates;
  std::optional<std::string> out_dir;
  std::optional<size_t> cap;
  std::optional<uint64_t> seed;
};

int run_gen_qa(const Context& ctx, const GenQaArgs& a) {
  const auto kg = ctx.graph();
  const auto templates = parse_templates(ctx.settings.path_or("templates", a.templates, ctx.work / "templates.tsv"));
  GenerateOptions o;
  o.per_template_cap = ctx.settings.get<size_t>("cap", a.cap, o.per_template_cap);
  o.seed = ctx.settings.get<uint64_t>("seed", a.seed, o.seed);
  const auto examples = generate_qa(kg, templates, o);
  const auto split = split_qa(examples, SplitRatios{}, o.seed);
  const fs::path out = a.out_dir ? fs::path(*a.out_dir) : ctx.qa_dir();
  ensure_dir(out);
  write_qa_tsv(kg, examples, out / "all.tsv");
  write_qa_tsv(kg, split.train, out / "train.tsv");
  write_qa_tsv(kg, split.valid, out / "valid.tsv");
  write_qa_tsv(kg, split.test, out / "test.tsv");
  std::cout << "templates: " << templates.size() << "\n";
  for (int h = 1; h <= 3; ++h) {
    std::cout << h << "-hop questions: " << filter_hops(examples, h).size() << "\n";
  }
  std::cout << "train/valid/test: " << split.train.size() << "/" << split.valid.size() << "/" << split.test.size()
            << "\n";
  return 0;
}

struct QaData {
  std::vector<QAExample> train, valid;
  TokenVocabulary vocab;
};

QaData load_qa_training(const Context& ctx, const KnowledgeGraph& kg) {
  QaData d;
  d.train = read_qa_tsv(kg, ctx.qa_dir() / "train.tsv");
  d.valid = read_qa_tsv(kg, ctx.qa_dir() / "valid.tsv");
  if (d.train.empty()) throw DataError("no training questions in " + (ctx.qa_dir() / "train.tsv").string());
  d.vocab = build_question_vocabulary(kg, d.train);
  return d;
}

// train-classifier

struct TrainClassifierArgs {
  std::optional<size_t> width, epochs, batch_size, patience;
  std::optional<double> lr, weight_decay;
  std::optional<uint64_t> seed;
  bool quiet = false;
};

int run_train_classifier(const Context& ctx, const TrainClassifierArgs& a) {
  const auto kg = ctx.graph();
  const auto data = load_qa_training(ctx, kg);
  const auto& s = ctx.settings;
  ClassifierTrainConfig c;
  c.width = s.get<size_t>("width", a.width, c.width);
  c.epochs = s.get<size_t>("epochs", a.epochs, c.epochs);
  c.batch_size = s.get<size_t>("batch_size", a.batch_size, c.batch_size);
  c.patience = s.get<size_t>("patience", a.patience, c.patience);
  c.learning_rate = s.get<double>("lr", a.lr, c.learning_rate);
  c.weight_decay = s.get<double>("weight_decay", a.weight_decay, c.weight_decay);
  c.seed = s.get<uint64_t>("seed", a.seed, c.seed);
  const auto train = classifier_examples(kg, data.vocab, data.train);
  const auto valid = classifier_examples(kg, data.vocab, data.valid);
  std::function<void(const ClassifierEpoch&)> cb;
  if (!a.quiet) {
    cb = [](const ClassifierEpoch& e) {
      std::cerr << "epoch " << e.epoch << " loss " << fixed(e.loss, 5) << " train_acc " << fixed(e.train_accuracy)
                << " valid_acc " << fixed(e.valid_accuracy) << "\n";
    };
  }
  const auto result = train_classifier(data.vocab.size(), train, valid, c, cb);
  save_classifier(result.classifier, data.vocab, ctx.classifier());
  std::cout << "vocabulary: " << data.vocab.size() << "\n";
  if (!valid.empty()) std::cout << "valid accuracy: " << fixed(classifier_accuracy(result.classifier, valid)) << "\n";
  std::cout << "checkpoint: " << ctx.classifier().string() << "\n";
  return 0;
}

// train-qa

struct TrainQaArgs {
  int hops = 0;
  std::optional<size_t> width, epochs, batch_size, patience, eval_every;
  std::optional<double> lr, weight_decay, label_smoothing;
  std::optional<uint64_t> seed;
  bool quiet = false;
};

int run_train_qa(const Context& ctx, const TrainQaArgs& a) {
  const auto kg = ctx.graph();
  const auto model = load_checkpoint(ctx.kge(), kg);
  const auto data = load_qa_training(ctx, kg);
  const auto& s = ctx.settings;
  QATrainConfig c;
  c.width = s.get<size_t>("width", a.width, c.width);
  c.epochs = s.get<size_t>("epochs", a.epochs, c.epochs);
  c.batch_size = s.get<size_t>("batch_size", a.batch_size, c.batch_size);
  c.patience = s.get<size_t>("patience", a.patience, c.patience);
  c.eval_every = s.get<size_t>("eval_every", a.eval_every, c.eval_every);
  c.learning_rate = s.get<double>("lr", a.lr, c.learning_rate);
  c.weight_decay = s.get<double>("weight_decay", a.weight_decay, c.weight_decay);
  c.label_smoothing = s.get<double>("label_smoothing", a.label_smoothing, c.label_smoothing);
  c.seed = s.get<uint64_t>("seed", a.seed, c.seed);
  const auto train = filter_hops(data.train, a.hops);
  const auto valid = filter_hops(data.valid, a.hops);
  if (train.empty()) throw DataError("no " + std::to_string(a.hops) + "-hop training questions");
  std::function<void(const QAEpoch&)> cb;
  if (!a.quiet) {
    cb = [](const QAEpoch& e) {
      std::cerr << "epoch " << e.epoch << " loss " << fixed(e.loss, 5);
      if (e.valid_hits_at_10) std::cerr << " valid_hits@10 " << fixed(*e.valid_hits_at_10);
      std::cerr << "\n";
    };
  }
  const auto result = train_qa(model, kg, data.vocab, train, valid, c, cb);
  save_encoder(result.encoder, data.vocab, kg.entities().fingerprint(), ctx.encoder(a.hops));
  std::cout << a.hops << "-hop questions train/valid: " << train.size() << "/" << valid.size() << "\n"
            << "best epoch: " << result.best_epoch << "\n"
            << "checkpoint: " << ctx.encoder(a.hops).string() << "\n";
  return 0;
}

// eval-qa

struct EvalQaArgs {
  size_t k = 10;
  bool json = false;
};

int run_eval_qa(const Context& ctx, const EvalQaArgs& a) {
  const auto kg = ctx.graph();
  const auto model = load_checkpoint(ctx.kge(), kg);
  const auto test = read_qa_tsv(kg, ctx.qa_dir() / "test.tsv");
  json report = json::object();
  std::optional<double> classifier_acc;
  for (int h = 1; h <= 3; ++h) {
    const auto subset = filter_hops(test, h);
    if (subset.empty() || !fs::exists(ctx.encoder(h))) continue;
    auto loaded = load_encoder(ctx.encoder(h));
    if (loaded.entity_fingerprint != kg.entities().fingerprint()) {
      throw IncompatibleGraphError(ctx.encoder(h).string() + " was trained against a different graph");
    }
    report[std::to_string(h)] = evaluate_qa(model, loaded.encoder, kg, loaded.vocab, subset, a.k);
  }
  if (report.empty()) throw MissingFileError("no encoder checkpoints found in " + ctx.work.string());
  if (fs::exists(ctx.classifier())) {
    auto clf = load_classifier(ctx.classifier());
    classifier_acc = classifier_accuracy(clf.classifier, classifier_examples(kg, clf.vocab, test));
  }
  if (a.json) {
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  std::cout << "hits@" << a.k << " on test questions\n";
  std::cout << std::left << std::setw(20) << "model";
  for (int h = 1; h <= 3; ++h) std::cout << std::setw(10) << (std::to_string(h) + "-hop");
  std::cout << "\n" << std::setw(20) << "ComplEx + BoW";
  for (int h = 1; h <= 3; ++h) {
    const auto key = std::to_string(h);
    std::cout << std::setw(10) << (report.contains(key) ? fixed(report[key].get<double>()) : std::string("-"));
  }
  std::cout << "\n";
  if (classifier_acc) std::cout << "hop classifier accuracy: " << fixed(*classifier_acc) << "\n";
  return 0;
}

// ask

struct AskArgs {
  std::string question;
  std::optional<size_t> top_k;
  bool json = false;
};

int run_ask(const Context& ctx, const AskArgs& a) {
  Service service(load_pipeline(ctx.pipeline_paths()));
  json req = {{"question", a.question}};
  if (a.top_k) req["top_k"] = *a.top_k;
  const auto reply = service.ask(req.dump());
  const json body = json::parse(reply.body);
  if (a.json) {
    std::cout << body.dump(2) << "\n";
    return reply.status == 200 ? 0 : 1;
  }
  if (reply.status != 200) {
    std::cerr << "error [" << body["error"]["code"].get<std::string>()
              << "]: " << body["error"]["message"].get<std::string>() << "\n";
    if (body["error"].contains("candidates")) {
      for (const auto& c : body["error"]["candidates"]) {
        std::cerr << "  candidate " << c["id"].get<std::string>() << "  " << c["name"].get<std::string>() << "\n";
      }
    }
    return 1;
  }
  std::cout << "head: " << body["head"]["name"].get<std::string>() << " (" << body["head"]["id"].get<std::string>()
            << ")\n"
            << "hops: " << body["hops"]["class"].get<int>() << "\n";
  int rank = 1;
  for (const auto& ans : body["answers"]) {
    std::cout << std::right << std::setw(3) << rank++ << "  " << std::setw(9) << fixed(ans["score"].get<double>())
              << "  " << std::left << std::setw(28) << ans["name"].get<std::string>() << " "
              << ans["id"].get<std::string>() << "\n";
  }
  return 0;
}

// serve

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<size_t> threads, top_k, max_top_k;
};

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const Context& ctx, const ServeArgs& a) {
  const auto& s = ctx.settings;
  ServiceConfig c;
  c.paths = ctx.pipeline_paths();
  c.host = s.get<std::string>("host", a.host, c.host);
  c.port = s.get<int>("port", a.port, c.port);
  c.threads = s.get<size_t>("threads", a.threads, c.threads);
  c.default_top_k = s.get<size_t>("top_k", a.top_k, c.default_top_k);
  c.max_top_k = s.get<size_t>("max_top_k", a.max_top_k, c.max_top_k);
  c.validate();
  const Service service(load_pipeline(c.paths), c.default_top_k, c.max_top_k);
  HttpServer server(service, c.threads);
  const int port = server.bind(c.host, c.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << c.host << ":" << port << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question answering over a biomedical knowledge graph with ComplEx embeddings", "kgqa"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config, "JSON config file (also KGQA_CONFIG)");
  app.add_option("--work-dir", common.work_dir, "Artifact directory (default ./kgqa-work)");
  app.add_option("--triples", common.triples, "Triples TSV (default <work-dir>/triples.tsv)");
  app.add_option("--nodes", common.nodes, "Nodes TSV (default <work-dir>/nodes.tsv when present)");
  app.add_option("--synonyms", common.synonyms, "Synonyms TSV (default <work-dir>/synonyms.tsv when present)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load the graph TSVs and print a summary");
  c_ingest->add_flag("--json", ingest.json, "Machine-readable output");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-kg", "Write the synthetic desk-scale graph and templates");
  c_synth->add_option("--out", synth.out, "Output directory (default <work-dir>)");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--groups", synth.groups, "Groups per node kind");
  c_synth->add_option("--group-size", synth.group_size, "Entities per group");
  c_synth->add_option("--density", synth.density, "Edge probability inside mapped groups");

  TrainKgeArgs tk;
  auto* c_tk = app.add_subcommand("train-kge", "Split triples 80/10/10 and train ComplEx embeddings");
  c_tk->add_option("--dim", tk.dim, "Complex embedding dimension");
  c_tk->add_option("--epochs", tk.epochs, "Maximum epochs");
  c_tk->add_option("--batch-size", tk.batch_size, "Positive triples per batch");
  c_tk->add_option("--lr", tk.lr, "AdaGrad learning rate");
  c_tk->add_option("--negatives", tk.negatives, "Negatives per positive");
  c_tk->add_option("--l2", tk.l2, "L2 weight");
  c_tk->add_option("--patience", tk.patience, "Stagnant evaluations before stopping");
  c_tk->add_option("--eval-every", tk.eval_every, "Epochs between validation runs");
  c_tk->add_option("--seed", tk.seed, "Random seed (split and training)");
  c_tk->add_flag("--quiet", tk.quiet, "No per-epoch progress");

  EvalKgeArgs ek;
  auto* c_ek = app.add_subcommand("eval-kge", "Rank-based link-prediction metrics");
  c_ek->add_option("--split", ek.split, "Split file under <work-dir>/split")->check(CLI::IsMember({"train", "valid", "test"}));
  c_ek->add_option("--eval-triples", ek.eval_triples, "Evaluate this triples TSV instead");
  c_ek->add_flag("--raw", ek.raw, "Unfiltered ranking");
  c_ek->add_flag("--json", ek.json, "Machine-readable output");

  GenQaArgs gq;
  auto* c_gq = app.add_subcommand("gen-qa", "Generate template questions and split them");
  c_gq->add_option("--templates", gq.templates, "Templates TSV (default <work-dir>/templates.tsv)");
  c_gq->add_option("--out-dir", gq.out_dir, "Output directory (default <work-dir>/qa)");
  c_gq->add_option("--cap", gq.cap, "Maximum questions per template");
  c_gq->add_option("--seed", gq.seed, "Random seed (sampling and split)");

  TrainClassifierArgs tc;
  auto* c_tc = app.add_subcommand("train-classifier", "Train the hop classifier");
  c_tc->add_option("--width", tc.width, "Token embedding width");
  c_tc->add_option("--epochs", tc.epochs, "Maximum epochs");
  c_tc->add_option("--batch-size", tc.batch_size, "Questions per batch");
  c_tc->add_option("--lr", tc.lr, "AdamW learning rate");
  c_tc->add_option("--weight-decay", tc.weight_decay, "AdamW weight decay");
  c_tc->add_option("--patience", tc.patience, "Epochs without improvement before stopping");
  c_tc->add_option("--seed", tc.seed, "Random seed");
  c_tc->add_flag("--quiet", tc.quiet, "No per-epoch progress");

  TrainQaArgs tq;
  auto* c_tq = app.add_subcommand("train-qa", "Train the question encoder for one hop class");
  c_tq->add_option("--hops", tq.hops, "Hop class")->required()->check(CLI::Range(1, 3));
  c_tq->add_option("--width", tq.width, "Hidden width");
  c_tq->add_option("--epochs", tq.epochs, "Maximum epochs");
  c_tq->add_option("--batch-size", tq.batch_size, "Questions per batch");
  c_tq->add_option("--lr", tq.lr, "AdamW learning rate");
  c_tq->add_option("--weight-decay", tq.weight_decay, "AdamW weight decay");
  c_tq->add_option("--label-smoothing", tq.label_smoothing, "Label smoothing epsilon");
  c_tq->add_option("--patience", tq.patience, "Stagnant evaluations before stopping");
  c_tq->add_option("--eval-every", tq.eval_every, "Epochs between validation runs");
  c_tq->add_option("--seed", tq.seed, "Random seed");
  c_tq->add_flag("--quiet", tq.quiet, "No per-epoch progress");

  EvalQaArgs eq;
  auto* c_eq = app.add_subcommand("eval-qa", "Per-hop hits@k on test questions");
  c_eq->add_option("--k", eq.k, "Cutoff")->check(CLI::PositiveNumber);
  c_eq->add_flag("--json", eq.json, "Machine-readable output");

  AskArgs ask;
  auto* c_ask = app.add_subcommand("ask", "Answer one question");
  c_ask->add_option("--question,-q", ask.question, "Question text")->required();
  c_ask->add_option("--top-k", ask.top_k, "Number of answers");
  c_ask->add_flag("--json", ask.json, "Print the service response body");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
  c_serve->add_option("--host", serve.host, "Bind address");
  c_serve->add_option("--port", serve.port, "Port (0 picks a free one)");
  c_serve->add_option("--threads", serve.threads, "Worker threads");
  c_serve->add_option("--top-k", serve.top_k, "Default number of answers");
  c_serve->add_option("--max-top-k", serve.max_top_k, "Largest top_k a request may ask for");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Context ctx;
    ctx.flags = common;
    ctx.settings.load_config(common.config);
    ctx.work = ctx.settings.path_or("work_dir", common.work_dir, "kgqa-work");

    if (*c_ingest) return run_ingest(ctx, ingest);
    if (*c_synth) return run_synth(ctx, synth);
    if (*c_tk) return run_train_kge(ctx, tk);
    if (*c_ek) return run_eval_kge(ctx, ek);
    if (*c_gq) return run_gen_qa(ctx, gq);
    if (*c_tc) return run_train_classifier(ctx, tc);
    if (*c_tq) return run_train_qa(ctx, tq);
    if (*c_eq) return run_eval_qa(ctx, eq);
    if (*c_ask) return run_ask(ctx, ask);
    if (*c_serve) return run_serve(ctx, serve);
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
