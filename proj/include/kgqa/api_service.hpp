#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "kgqa/qa_engine.hpp"

namespace kgqa {

// Reads an environment variable; tests substitute a map.
using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

struct ServiceConfig {
  PipelinePaths paths;
  std::string host = "127.0.0.1";
  int port = 8080;
  size_t default_top_k = 10;
  size_t max_top_k = 100;
  size_t threads = 8;

  // JSON config file; relative paths resolve against the file's directory.
  // Keys: triples, nodes, synonyms, kge, classifier, encoders {"1","2","3"},
  // host, port, default_top_k, max_top_k, threads.
  static ServiceConfig from_file(const std::filesystem::path& path);

  // KGQA_TRIPLES, KGQA_NODES, KGQA_SYNONYMS, KGQA_KGE, KGQA_CLASSIFIER,
  // KGQA_ENCODER_1..3, KGQA_HOST, KGQA_PORT, KGQA_TOP_K, KGQA_MAX_TOP_K,
  // KGQA_THREADS override the corresponding fields.
  void apply_env(const EnvLookup& env);

  void validate() const;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

// Request handling for the HTTP routes, independent of any socket. Holds the
// pipeline read-only; every handler is const and safe to call concurrently.
class Service {
 public:
  Service(QAPipeline pipeline, size_t default_top_k = 10, size_t max_top_k = 100);

  HttpReply ask(std::string_view request_body) const;
  HttpReply entities(std::string_view prefix, std::optional<std::string_view> limit) const;
  HttpReply health() const;
  HttpReply model_info() const;

  const QAPipeline& pipeline() const { return pipeline_; }
  uint64_t model_fingerprint() const { return model_fingerprint_; }

 private:
  QAPipeline pipeline_;
  size_t default_top_k_;
  size_t max_top_k_;
  uint64_t model_fingerprint_;
};

// GET /health, GET /entities, POST /ask, GET /model/info over HTTP/1.1 with
// permissive CORS headers.
class HttpServer {
 public:
  HttpServer(const Service& service, size_t threads = 8);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kgqa
