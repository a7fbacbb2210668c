#include "kgqa/api_service.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/hashing.hpp"

namespace kgqa {

using nlohmann::json;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

size_t parse_count(const std::string& text, const std::string& what) {
  size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(what + " must be a non-negative integer, got \"" + text + "\"");
  return value;
}

HttpReply error_reply(int status, const std::string& code, const std::string& message, json extra = json::object()) {
  json body = {{"error", {{"code", code}, {"message", message}}}};
  for (auto& [k, v] : extra.items()) body["error"][k] = v;
  return {status, body.dump()};
}

json entity_json(const QAPipeline& p, EntityId e) {
  return {{"id", p.kg.entities().at(e)}, {"name", p.gazetteer.display_name(e)}, {"kind", p.kg.meta(e).kind}};
}

void hash_doubles(Fnv1a64& h, std::span<const double> values) {
  for (double v : values) {
    const auto bits = std::bit_cast<uint32_t>(static_cast<float>(v));
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    h.update(std::string_view(bytes, 4));
  }
}

std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  const auto base = path.parent_path();
  ServiceConfig c;
  try {
    if (j.contains("triples")) c.paths.triples = resolve(base, j["triples"].get<std::string>());
    if (j.contains("nodes")) c.paths.nodes = resolve(base, j["nodes"].get<std::string>());
    if (j.contains("synonyms")) c.paths.synonyms = resolve(base, j["synonyms"].get<std::string>());
    if (j.contains("kge")) c.paths.kge = resolve(base, j["kge"].get<std::string>());
    if (j.contains("classifier")) c.paths.classifier = resolve(base, j["classifier"].get<std::string>());
    if (j.contains("encoders")) {
      for (auto& [hop, file] : j["encoders"].items()) {
        c.paths.encoders[static_cast<int>(parse_count(hop, "encoder hop"))] = resolve(base, file.get<std::string>());
      }
    }
    if (j.contains("host")) c.host = j["host"].get<std::string>();
    if (j.contains("port")) c.port = j["port"].get<int>();
    if (j.contains("default_top_k")) c.default_top_k = j["default_top_k"].get<size_t>();
    if (j.contains("max_top_k")) c.max_top_k = j["max_top_k"].get<size_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return c;
}

void ServiceConfig::apply_env(const EnvLookup& env) {
  if (auto v = env("KGQA_TRIPLES")) paths.triples = *v;
  if (auto v = env("KGQA_NODES")) paths.nodes = std::filesystem::path(*v);
  if (auto v = env("KGQA_SYNONYMS")) paths.synonyms = std::filesystem::path(*v);
  if (auto v = env("KGQA_KGE")) paths.kge = *v;
  if (auto v = env("KGQA_CLASSIFIER")) paths.classifier = *v;
  for (int hop = 1; hop <= 3; ++hop) {
    if (auto v = env("KGQA_ENCODER_" + std::to_string(hop))) paths.encoders[hop] = *v;
  }
  if (auto v = env("KGQA_HOST")) host = *v;
  if (auto v = env("KGQA_PORT")) port = static_cast<int>(parse_count(*v, "KGQA_PORT"));
  if (auto v = env("KGQA_TOP_K")) default_top_k = parse_count(*v, "KGQA_TOP_K");
  if (auto v = env("KGQA_MAX_TOP_K")) max_top_k = parse_count(*v, "KGQA_MAX_TOP_K");
  if (auto v = env("KGQA_THREADS")) threads = parse_count(*v, "KGQA_THREADS");
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port out of range: " + std::to_string(port));
  if (max_top_k < 1) throw ConfigError("max_top_k must be at least 1");
  if (default_top_k < 1 || default_top_k > max_top_k) throw ConfigError("default_top_k must be in [1, max_top_k]");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

Service::Service(QAPipeline pipeline, size_t default_top_k, size_t max_top_k)
    : pipeline_(std::move(pipeline)), default_top_k_(default_top_k), max_top_k_(max_top_k) {
  if (max_top_k_ < 1 || default_top_k_ < 1 || default_top_k_ > max_top_k_) {
    throw ConfigError("default_top_k must be in [1, max_top_k]");
  }
  Fnv1a64 h;
  h.update_record(hex(pipeline_.kg.entities().fingerprint()));
  h.update_record(hex(pipeline_.kg.relations().fingerprint()));
  h.update_record(hex(pipeline_.vocab.fingerprint()));
  hash_doubles(h, pipeline_.model.entity_re_matrix());
  hash_doubles(h, pipeline_.model.entity_im_matrix());
  hash_doubles(h, pipeline_.model.relation_re_matrix());
  hash_doubles(h, pipeline_.model.relation_im_matrix());
  hash_doubles(h, pipeline_.classifier.parameters());
  for (const auto& [hop, enc] : pipeline_.encoders) {
    h.update_record(std::to_string(hop));
    hash_doubles(h, enc.parameters());
  }
  model_fingerprint_ = h.digest();
}

HttpReply Service::ask(std::string_view request_body) const {
  json req;
  try {
    req = json::parse(request_body);
  } catch (const json::exception&) {
    return error_reply(400, "invalid_request", "request body is not valid JSON");
  }
  if (!req.is_object() || !req.contains("question") || !req["question"].is_string()) {
    return error_reply(400, "invalid_request", "field \"question\" (string) is required");
  }
  const std::string question = req["question"].get<std::string>();
  if (trim(question).empty()) return error_reply(400, "empty_question", "question is empty");
  size_t top_k = default_top_k_;
  if (req.contains("top_k") && !req["top_k"].is_null()) {
    if (!req["top_k"].is_number_integer() || req["top_k"].get<long long>() < 1 ||
        req["top_k"].get<long long>() > static_cast<long long>(max_top_k_)) {
      return error_reply(400, "invalid_request", "top_k must be an integer in [1, " + std::to_string(max_top_k_) + "]");
    }
    top_k = req["top_k"].get<size_t>();
  }

  try {
    const AnswerResult r = answer_question(pipeline_, question, top_k);
    const EntityId head = r.head.entity();
    json answers = json::array();
    for (const auto& a : r.answers) {
      json item = entity_json(pipeline_, a.entity);
      item["score"] = a.score;
      answers.push_back(std::move(item));
    }
    json head_json = entity_json(pipeline_, head);
    head_json["span"] = {r.head.span.begin, r.head.span.end};
    head_json["surface"] = r.head.surface;
    json body = {
        {"question", question},
        {"head", head_json},
        {"hops", {{"class", r.hop.hops}, {"probabilities", r.hop.probabilities}}},
        {"answers", answers},
    };
    return {200, body.dump()};
  } catch (const NoEntityFoundError& e) {
    return error_reply(422, e.code(), e.what(), {{"normalized_question", e.normalized_question()}});
  } catch (const AmbiguousEntityError& e) {
    json candidates = json::array();
    for (EntityId c : e.candidates()) candidates.push_back(entity_json(pipeline_, c));
    return error_reply(422, e.code(), e.what(), {{"surface", e.surface()}, {"candidates", candidates}});
  } catch (const std::exception&) {
    return error_reply(500, "internal", "internal error while answering the question");
  }
}

HttpReply Service::entities(std::string_view prefix, std::optional<std::string_view> limit) const {
  size_t n = 20;
  if (limit) {
    try {
      n = parse_count(std::string(*limit), "limit");
    } catch (const ConfigError& e) {
      return error_reply(400, "invalid_request", e.what());
    }
  }
  json out = json::array();
  for (const auto& s : pipeline_.gazetteer.complete(prefix, n)) {
    out.push_back({{"id", pipeline_.kg.entities().at(s.entity)}, {"name", s.name}, {"kind", s.kind}});
  }
  return {200, out.dump()};
}

HttpReply Service::health() const {
  return {200, json{{"status", "ok"}, {"model_fingerprint", hex(model_fingerprint_)}}.dump()};
}

HttpReply Service::model_info() const {
  json encoders = json::object();
  for (const auto& [hop, enc] : pipeline_.encoders) encoders[std::to_string(hop)] = {{"width", enc.width()}};
  json body = {
      {"d", pipeline_.model.dim()},
      {"num_entities", pipeline_.kg.num_entities()},
      {"num_relations", pipeline_.kg.num_relations()},
      {"num_triples", pipeline_.kg.triples().size()},
      {"vocabulary_size", pipeline_.vocab.size()},
      {"encoders", encoders},
      {"hashes",
       {{"entities", hex(pipeline_.kg.entities().fingerprint())},
        {"relations", hex(pipeline_.kg.relations().fingerprint())},
        {"vocabulary", hex(pipeline_.vocab.fingerprint())},
        {"model", hex(model_fingerprint_)}}},
  };
  return {200, body.dump()};
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;

  explicit Impl(const Service& s) : service(s) {}
};

HttpServer::HttpServer(const Service& service, size_t threads) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  const Service& svc = service;
  srv.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // No SO_REUSEPORT: a second server on a taken port must fail to bind.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  srv.Get("/health", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
  srv.Get("/model/info",
          [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.model_info()); });
  srv.Get("/entities", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> limit;
    if (req.has_param("limit")) limit = req.get_param_value("limit");
    send(res, svc.entities(req.get_param_value("prefix"), limit));
  });
  srv.Post("/ask", [&svc, send](const httplib::Request& req, httplib::Response& res) { send(res, svc.ask(req.body)); });
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace kgqa
