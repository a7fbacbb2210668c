// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <complex>
#include <cstring>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kgqa/api_service.hpp"
#include "kgqa/checkpoint.hpp"
#include "kgqa/entity_matcher.hpp"
#include "kgqa/error.hpp"
#include "gradient_check.hpp"
#include "pipeline_fixture.hpp"
#include "test_support.hpp"

using namespace kgqa;
using namespace kgqa::testing;
using nlohmann::json;

namespace {

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailed(what);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

template <typename E, typename F>
void require_throws(F&& f, const std::string& what) {
  try {
    f();
  } catch (const E&) {
    return;
  }
  throw CheckFailed(what + ": expected exception not raised");
}

const DeskExperiment& desk() {
  static const DeskExperiment x = run_desk_experiment();
  return x;
}

// Criterion 1.
std::string complex_scoring() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const size_t d = 1 + uniform_index(rng, 64);
    const auto m = random_complex_model(7, 3, d, rng);
    const auto h = static_cast<EntityId>(uniform_index(rng, 7));
    const auto r = static_cast<RelationId>(uniform_index(rng, 3));
    const auto t = static_cast<EntityId>(uniform_index(rng, 7));
    const auto eh = m.entity(h), er = m.relation(r), et = m.entity(t);
    std::complex<double> sum = 0;
    for (size_t k = 0; k < d; ++k) {
      sum += std::complex<double>(eh.re[k], eh.im[k]) * std::complex<double>(er.re[k], er.im[k]) *
             std::conj(std::complex<double>(et.re[k], et.im[k]));
    }
    worst = std::max(worst, rel_err(score_triple(m, h, r, t), sum.real()));
  }
  require(worst <= 1e-9, "relative error " + sci(worst));

  auto unit = [](std::complex<double> h, std::complex<double> r, std::complex<double> t) {
    ComplexModel m(2, 1, 1);
    m.entity_re(0)[0] = h.real();
    m.entity_im(0)[0] = h.imag();
    m.entity_re(1)[0] = t.real();
    m.entity_im(1)[0] = t.imag();
    m.relation_re(0)[0] = r.real();
    m.relation_im(0)[0] = r.imag();
    return score_triple(m, 0, 0, 1);
  };
  require(unit({1, 0}, {1, 0}, {1, 0}) == 1.0, "worked example 1");
  require(unit({0, 1}, {0, 1}, {1, 0}) == -1.0, "worked example 2");
  require(unit({1, 2}, {0.5, -0.5}, {2, 0}) == 3.0, "worked example 3");
  const double secs = seconds_since(t0);
  require(secs < 1.0, "runtime " + fmt(secs) + " s");
  return "1000 draws, worst rel err " + sci(worst) + ", worked examples exact";
}

// Criterion 2.
std::string gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n = 200;
  const auto kge = check_kge_gradient(11, n);
  const auto enc = check_encoder_gradient(3, n);
  const auto clf = check_classifier_gradient(12, n);
  for (const auto& [name, r] : {std::pair{"kge", kge}, {"encoder", enc}, {"classifier", clf}}) {
    require(r.coordinates >= 100, std::string(name) + " coordinates");
    require(r.worst <= 1e-4, std::string(name) + " rel err " + sci(r.worst));
  }
  const double secs = seconds_since(t0);
  require(secs < 30.0, "runtime " + fmt(secs) + " s");
  return "worst rel err kge " + sci(kge.worst) + ", encoder " + sci(enc.worst) + ", classifier " +
         sci(clf.worst) + " over " + std::to_string(n) + " coords each";
}

class NoiseScorer final : public TripleScorer {
 public:
  explicit NoiseScorer(size_t n) : n_(n) {}
  size_t num_entities() const override { return n_; }
  std::vector<double> score_tails(EntityId h, RelationId r) const override { return noise(1, h, r); }
  std::vector<double> score_heads(RelationId r, EntityId t) const override { return noise(2, t, r); }

 private:
  std::vector<double> noise(uint64_t side, uint64_t e, uint64_t r) const {
    Rng rng(side * 1000003 + e * 7919 + r);
    std::vector<double> out(n_);
    for (auto& v : out) v = uniform_unit(rng);
    return out;
  }
  size_t n_;
};

// Criterion 3.
std::string metric_fixtures() {
  const std::vector<size_t> ks{1, 3, 10};
  const std::vector<RankRecord> fixture{{1, 1, 1.0, 100}, {3, 3, 3.0, 100}, {12, 12, 12.0, 100}};
  const auto m = summarize_ranks(fixture, ks);
  require(std::abs(m.amr - 5.3333) <= 1e-4, "AMR " + std::to_string(m.amr));
  require(std::abs(m.aamr - 0.10561) <= 1e-4, "AAMR " + std::to_string(m.aamr));
  require(std::abs(m.aamri - 0.91246) <= 1e-4, "AAMRI " + std::to_string(m.aamri));
  require(std::abs(m.hits(10) - 0.6667) <= 1e-4, "hits@10 " + std::to_string(m.hits(10)));

  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RankRecord> ranks;
    const size_t n = 1 + uniform_index(rng, 50);
    for (size_t i = 0; i < n; ++i) {
      const uint64_t cands = 2 + uniform_index(rng, 500);
      const uint64_t opt = 1 + uniform_index(rng, cands);
      const uint64_t pes = opt + uniform_index(rng, cands - opt + 1);
      ranks.push_back({opt, pes, (opt + pes) / 2.0, cands});
    }
    const auto r = summarize_ranks(ranks, ks);
    require(r.aamr > 0.0 && r.aamr < 2.0, "AAMR out of range: " + std::to_string(r.aamr));
    require(r.aamri >= -1.0 && r.aamri <= 1.0, "AAMRI out of range: " + std::to_string(r.aamri));
  }

  KnowledgeGraphBuilder b;
  for (int i = 0; i < 6000; ++i) {
    b.add_triple("e" + std::to_string(uniform_index(rng, 300)), "r" + std::to_string(uniform_index(rng, 4)),
                 "e" + std::to_string(uniform_index(rng, 300)));
  }
  const auto kg = std::move(b).build();
  const KnownTriples known(kg.triples());
  const auto random = evaluate_link_prediction(NoiseScorer(kg.num_entities()), kg.triples(), known);
  require(random.num_queries >= 10000, "only " + std::to_string(random.num_queries) + " queries");
  require(std::abs(random.aamri) <= 0.05, "random AAMRI " + std::to_string(random.aamri));
  return "fixture AMR " + fmt(m.amr) + " AAMR " + fmt(m.aamr, 5) + " AAMRI " + fmt(m.aamri, 5) + " hits@10 " +
         fmt(m.hits(10)) + "; 1000 random fixtures in range; random scorer AAMRI " + fmt(random.aamri) + " over " +
         std::to_string(random.num_queries) + " queries";
}

// Criterion 4.
std::string desk_link_prediction() {
  const auto& x = desk();
  const size_t total = x.triples.train.size() + x.triples.valid.size() + x.triples.test.size();
  require(x.pipeline.kg.num_entities() == 200 && x.pipeline.kg.num_relations() == 5, "graph shape");
  require(std::abs(x.triples.test.size() / static_cast<double>(total) - 0.1) < 0.01, "test share");
  require(std::abs(x.triples.valid.size() / static_cast<double>(total) - 0.1) < 0.01, "valid share");
  require(x.pipeline.model.dim() == 64, "dimension");
  require(x.kge.history.epochs_run <= 200, "epochs " + std::to_string(x.kge.history.epochs_run));
  const double hits = x.link_prediction.hits(10);
  require(hits >= 0.9, "filtered hits@10 " + fmt(hits));
  require(x.kge_seconds < 300.0, "training took " + fmt(x.kge_seconds, 1) + " s");
  return "filtered test hits@10 " + fmt(hits) + " after " + std::to_string(x.kge.history.epochs_run) +
         " epochs, " + fmt(x.kge_seconds, 1) + " s";
}

// Criterion 5.
std::string early_stopping() {
  KnowledgeGraphBuilder b;
  for (int c = 0; c < 30; ++c) {
    for (int g = 0; g < 30; ++g) {
      if (c % 3 == g % 3 && (c + g) % 2 == 0) b.add_triple("c" + std::to_string(c), "binds", "g" + std::to_string(g));
    }
  }
  const auto kg = std::move(b).build();
  const std::vector<Triple> train(kg.triples().begin(), kg.triples().end());
  TrainConfig c;
  c.dim = 8;
  c.epochs = 500;
  c.batch_size = 64;
  size_t calls = 0;
  TrainHooks hooks;
  hooks.validation = [&](const ComplexModel&) {
    ++calls;
    return 0.25;
  };
  const auto r = train_kge(kg, train, {}, c, hooks);
  require(r.history.stopped_early, "did not stop early");
  require(r.history.stagnant_evaluations == 20, "stagnant " + std::to_string(r.history.stagnant_evaluations));
  require(calls == 21, "evaluations " + std::to_string(calls));
  require(r.history.epochs_run == 21, "epochs " + std::to_string(r.history.epochs_run));
  return "stopped at epoch 21 after 20 stagnant evaluations";
}

// Criterion 6.
std::string qa_link_prediction_equivalence() {
  Rng rng(23);
  KnowledgeGraphBuilder b;
  for (int i = 0; i < 50; ++i) b.add_triple("e" + std::to_string(i), "r0", "e" + std::to_string((i + 1) % 50));
  for (int i = 0; i < 250; ++i) {
    b.add_triple("e" + std::to_string(uniform_index(rng, 50)), "r" + std::to_string(uniform_index(rng, 4)),
                 "e" + std::to_string(uniform_index(rng, 50)));
  }
  const auto kg = std::move(b).build();
  require(kg.num_entities() == 50, "fixture size");
  const auto m = random_complex_model(50, kg.num_relations(), 8, rng);
  const KnownTriples known(kg.triples());
  size_t pairs = 0, ranked = 0;
  for (EntityId h = 0; h < 50; ++h) {
    for (RelationId r = 0; r < kg.num_relations(); ++r) {
      ++pairs;
      const auto qa = rank_answers(m, h, relation_embedding(m, r), 49);
      const auto lp_scores = score_all_tails(m, h, r);
      const EntityId head[] = {h};
      const auto lp = top_entities(lp_scores, 49, head);
      require(qa.size() == lp.size(), "list length");
      for (size_t i = 0; i < qa.size(); ++i) {
        require(qa[i].entity == lp[i], "order differs at head " + std::to_string(h) + " relation " + std::to_string(r));
        require(qa[i].score == lp_scores[lp[i]], "score differs");
      }
      for (EntityId t : known.tails(h, r)) {
        if (t == h) continue;
        std::vector<char> mask(50, 0);
        for (EntityId o : known.tails(h, r)) mask[o] = o != t;
        mask[h] = 1;
        const auto rank = compute_rank(lp_scores, t, mask);
        size_t position = 0;
        for (const auto& a : qa) {
          if (mask[a.entity]) continue;
          ++position;
          if (a.entity == t) break;
        }
        require(rank.realistic == static_cast<double>(position), "filtered rank differs");
        ++ranked;
      }
    }
  }
  return std::to_string(pairs) + " (head, relation) pairs identical, " + std::to_string(ranked) +
         " filtered ranks equal";
}

// Criterion 7.
std::string desk_qa() {
  const auto& x = desk();
  std::map<size_t, size_t> per_hop;
  for (const auto& t : x.templates) ++per_hop[t.hops()];
  for (size_t h = 1; h <= 3; ++h) require(per_hop[h] >= 3, "templates for hop " + std::to_string(h));
  const double lp = x.link_prediction.hits(10);
  const double h1 = x.qa_hits_at_10.at(1), h2 = x.qa_hits_at_10.at(2), h3 = x.qa_hits_at_10.at(3);
  require(std::abs(h1 - lp) <= 0.05, "1-hop " + fmt(h1) + " vs link prediction " + fmt(lp));
  require(h2 >= 0.5, "2-hop " + fmt(h2));
  require(h3 >= 0.5, "3-hop " + fmt(h3));
  require(x.total_seconds < 900.0, "runtime " + fmt(x.total_seconds, 1) + " s");
  return "hits@10 1-hop " + fmt(h1) + " (LP " + fmt(lp) + "), 2-hop " + fmt(h2) + ", 3-hop " + fmt(h3) + ", " +
         std::to_string(x.templates.size()) + " templates, " + fmt(x.total_seconds, 1) + " s total";
}

// Criterion 8.
std::string hop_classifier() {
  const auto& x = desk();
  require(x.classifier_accuracy >= 0.95, "accuracy " + fmt(x.classifier_accuracy));
  return "held-out accuracy " + fmt(x.classifier_accuracy) + " on " + std::to_string(x.qa.test.size()) + " questions";
}

// Criterion 9.
std::string entity_extraction() {
  const auto synth = make_synthetic_kg();
  const auto gz = Gazetteer::build(synth.kg);
  const auto examples = generate_qa(synth.kg, synth.templates, GenerateOptions{});
  require(!examples.empty(), "no questions");
  for (const auto& ex : examples) {
    const auto m = extract_head(ex.question, gz);
    require(!m.ambiguous() && m.entity() == ex.head, "wrong head for: " + ex.question);
  }
  const std::string q =
      "list all diseases that upregulate the gene which interact with gene involved in lung vasculature development";
  const auto m = extract_head(q, gz);
  require(!m.ambiguous(), "ambiguous");
  require(synth.kg.meta(m.entity()).name == "lung vasculature development", "wrong entity");
  require(q.substr(m.span.begin, m.span.end - m.span.begin) == "lung vasculature development", "wrong span");
  return std::to_string(examples.size()) + "/" + std::to_string(examples.size()) +
         " heads recovered; 3-hop sentence resolves to lung vasculature development";
}

void flip_byte(const std::filesystem::path& p, size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x5a));
}

// Criterion 10.
std::string checkpoints() {
  const auto& p = desk().pipeline;
  TempDir dir;

  save_checkpoint(p.model, p.kg, dir / "kge.bin");
  const auto model = load_checkpoint(dir / "kge.bin", p.kg);
  require(model == p.model, "kge round trip");
  require(std::memcmp(model.entity_re_matrix().data(), p.model.entity_re_matrix().data(),
                      p.model.entity_re_matrix().size() * sizeof(double)) == 0,
          "kge bytes");

  const auto& enc = p.encoders.at(2);
  save_encoder(enc, p.vocab, p.kg.entities().fingerprint(), dir / "enc.bin");
  const auto enc_back = load_encoder(dir / "enc.bin");
  require(enc_back.encoder == enc && enc_back.vocab == p.vocab, "encoder round trip");
  require(enc_back.entity_fingerprint == p.kg.entities().fingerprint(), "encoder graph hash");

  save_classifier(p.classifier, p.vocab, dir / "clf.bin");
  const auto clf_back = load_classifier(dir / "clf.bin");
  require(clf_back.classifier == p.classifier && clf_back.vocab == p.vocab, "classifier round trip");

  for (const char* name : {"kge.bin", "enc.bin", "clf.bin"}) {
    std::filesystem::copy_file(dir / name, dir / (std::string("bad_") + name));
    flip_byte(dir / (std::string("bad_") + name), 0);
  }
  require_throws<FormatError>([&] { load_checkpoint(dir / "bad_kge.bin", p.kg); }, "kge magic");
  require_throws<FormatError>([&] { load_encoder(dir / "bad_enc.bin"); }, "encoder magic");
  require_throws<FormatError>([&] { load_classifier(dir / "bad_clf.bin"); }, "classifier magic");

  SyntheticKgConfig other_cfg;
  other_cfg.group_size = 9;
  const auto other = make_synthetic_kg(other_cfg);
  require_throws<IncompatibleGraphError>([&] { load_checkpoint(dir / "kge.bin", other.kg); }, "kge foreign graph");

  // An encoder trained against one graph is refused when loaded beside another.
  write_synthetic_kg(other, dir.path());
  save_checkpoint(ComplexModel(other.kg.num_entities(), other.kg.num_relations(), p.model.dim()), other.kg,
                  dir / "other_kge.bin");
  const PipelinePaths paths{dir / "triples.tsv", dir / "nodes.tsv", std::nullopt, dir / "other_kge.bin",
                            dir / "clf.bin", {{2, dir / "enc.bin"}}};
  require_throws<IncompatibleGraphError>([&] { load_pipeline(paths); }, "encoder foreign graph");
  return "kge, encoder and classifier bit-exact; corrupted magic and foreign graph hashes rejected";
}

class LiveServer {
 public:
  explicit LiveServer(const Service& service) : server_(service, 8) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
    while (!server_.running()) std::this_thread::yield();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  HttpServer server_;
  std::thread thread_;
  int port_ = 0;
};

std::string error_code(const HttpReply& r) { return json::parse(r.body)["error"]["code"].get<std::string>(); }

// Criterion 11.
std::string service_contract() {
  const Service svc(desk().pipeline);
  const std::string request = R"({"question": "which genes interact with IL-6"})";
  const auto body = json::parse(svc.ask(request).body);
  const auto& answers = body.at("answers");
  require(answers.size() == 10, "answers " + std::to_string(answers.size()));
  for (size_t i = 1; i < answers.size(); ++i) {
    require(answers[i - 1]["score"].get<double>() >= answers[i]["score"].get<double>(), "not descending");
  }

  LiveServer live(svc);
  std::vector<std::future<std::pair<int, std::string>>> futures;
  for (int i = 0; i < 32; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      httplib::Client client("127.0.0.1", live.port());
      auto r = client.Post("/ask", request, "application/json");
      return r ? std::make_pair(r->status, r->body) : std::make_pair(-1, std::string());
    }));
  }
  const auto expected = svc.ask(request).body;
  for (auto& f : futures) {
    const auto [status, text] = f.get();
    require(status == 200, "concurrent status " + std::to_string(status));
    require(text == expected, "concurrent bodies differ");
  }

  const auto empty = svc.ask(R"({"question": "   "})");
  require(empty.status == 400 && error_code(empty) == "empty_question", "empty_question");
  const auto none = svc.ask(R"({"question": "what is the weather today"})");
  require(none.status == 422 && error_code(none) == "no_entity", "no_entity");
  QAPipeline dup = desk().pipeline;
  dup.gazetteer.add_form("il-6", eid(dup.kg, "Disease::0"));
  const Service dup_svc(std::move(dup));
  const auto amb = dup_svc.ask(request);
  require(amb.status == 422 && error_code(amb) == "ambiguous_entity", "ambiguous_entity");
  require(json::parse(amb.body)["error"]["candidates"].size() == 2, "ambiguity candidates");
  return "10 descending answers; 32 concurrent loopback requests identical; empty_question, no_entity, "
         "ambiguous_entity returned";
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<std::string()>>> criteria = {
      {1, complex_scoring},        {2, gradient_checks},   {3, metric_fixtures},
      {4, desk_link_prediction},   {5, early_stopping},    {6, qa_link_prediction_equivalence},
      {7, desk_qa},                {8, hop_classifier},    {9, entity_extraction},
      {10, checkpoints},           {11, service_contract},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string status = "PASS", detail;
    try {
      detail = check();
    } catch (const std::exception& e) {
      status = "FAIL";
      detail = e.what();
      ++failures;
    }
    std::cout << "criterion " << std::setw(2) << id << ": " << status << "  " << detail << "  ("
              << fmt(seconds_since(t0), 2) << " s)" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
