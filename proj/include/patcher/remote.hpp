#pragma once

// HTTP client for the model sidecar (wire protocol v1). Implements all four
// capabilities; every decoded response is checked before it is returned.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "patcher/backends.hpp"

namespace patcher {

struct RemoteConfig {
  std::string endpoint = "http://127.0.0.1:8000";
  int attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{120000};
  size_t pool_size = 4;
};

/// PATCHER_ENDPOINT wins over the configured endpoint.
inline std::string resolve_endpoint(const std::string& configured) {
  if (const char* env = std::getenv("PATCHER_ENDPOINT"); env && *env) return env;
  return configured;
}

struct HealthInfo {
  std::string status;
  std::string model;
  json raw;
};

class RemoteBackend final : public GeneratorCapability,
                            public ScorerCapability,
                            public SuggesterCapability,
                            public EmbedderCapability {
 public:
  explicit RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.endpoint = resolve_endpoint(cfg_.endpoint);
    while (!cfg_.endpoint.empty() && cfg_.endpoint.back() == '/') cfg_.endpoint.pop_back();
    if (cfg_.attempts < 1) throw Error(ErrorCode::InvalidArgument, "attempts must be >= 1");
    if (cfg_.pool_size < 1) throw Error(ErrorCode::InvalidArgument, "pool_size must be >= 1");
  }

  const std::string& endpoint() const { return cfg_.endpoint; }

  HealthInfo health() {
    json body = call("GET", "/v1/health", json());
    HealthInfo h;
    h.status = field<std::string>(body, "status", "/v1/health");
    h.model = body.contains("model") && body["model"].is_string() ? body["model"].get<std::string>() : "";
    h.raw = body;
    if (h.status != "ok") throw Error(ErrorCode::ServerError, "health status " + h.status);
    return h;
  }

  GenerationRecord generate(const Prompt& prompt, std::int64_t seed) override {
    json body = call("POST", "/v1/generate", json{{"prompt", prompt.text}, {"seed", seed}});
    const char* where = "/v1/generate";
    auto image_id = field<std::string>(body, "image_id", where);
    auto tokens = field<std::vector<std::string>>(body, "tokens", where);
    auto attention = field<std::vector<double>>(body, "attention", where);
    if (attention.size() != tokens.size())
      throw Error(ErrorCode::ProtocolViolation, "attention has " + std::to_string(attention.size()) +
                                                    " entries for " + std::to_string(tokens.size()) + " tokens");
    if (attention.size() != prompt.tokens.size())
      throw Error(ErrorCode::ProtocolViolation, "attention has " + std::to_string(attention.size()) +
                                                    " entries, prompt has " +
                                                    std::to_string(prompt.tokens.size()) + " tokens");
    GenerationRecord rec;
    rec.prompt_id = prompt.id;
    rec.image_ref = image_id;
    rec.seed = seed;
    for (size_t i = 0; i < attention.size(); ++i) {
      if (!std::isfinite(attention[i]) || attention[i] < 0)
        throw Error(ErrorCode::ProtocolViolation, "attention[" + std::to_string(i) + "] is negative or not finite");
      rec.taps.push_back(TokenAttentionPair{i, attention[i]});
    }
    return rec;
  }

  double similarity(const std::string& image_ref, const std::string& text) override {
    json body = call("POST", "/v1/similarity", json{{"image_id", image_ref}, {"text", text}});
    double score = field<double>(body, "score", "/v1/similarity");
    if (!(score >= 0.0 && score <= 1.0))
      throw Error(ErrorCode::ProtocolViolation, "similarity score " + std::to_string(score) + " outside [0,1]");
    return score;
  }

  std::vector<std::string> suggest(TemplateKind kind, const std::string& object,
                                   const std::optional<std::string>& prompt) override {
    json req{{"template", kind}, {"object", object}, {"prompt", prompt ? json(*prompt) : json(nullptr)}};
    json body = call("POST", "/v1/suggest", req);
    return field<std::vector<std::string>>(body, "items", "/v1/suggest");
  }

  std::vector<double> embed(const std::string& text) override {
    json body = call("POST", "/v1/embed", json{{"text", text}});
    auto v = field<std::vector<double>>(body, "vector", "/v1/embed");
    if (v.empty()) throw Error(ErrorCode::ProtocolViolation, "empty embedding");
    for (double x : v)
      if (!std::isfinite(x)) throw Error(ErrorCode::ProtocolViolation, "embedding has a non-finite component");
    return v;
  }

 private:
  template <class T>
  static T field(const json& body, const char* name, const char* where) {
    if (!body.is_object() || !body.contains(name))
      throw Error(ErrorCode::ProtocolViolation, std::string(where) + ": missing field " + name);
    try {
      return body.at(name).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolViolation, std::string(where) + ": bad field " + name + ": " + e.what());
    }
  }

  // Checked-out client from the bounded pool; returned on destruction.
  class Lease {
   public:
    Lease(RemoteBackend& owner, std::unique_ptr<httplib::Client> c) : owner_(owner), client_(std::move(c)) {}
    ~Lease() { owner_.release(std::move(client_)); }
    httplib::Client& operator*() { return *client_; }

   private:
    RemoteBackend& owner_;
    std::unique_ptr<httplib::Client> client_;
  };

  Lease acquire() {
    std::unique_lock lock(pool_mutex_);
    pool_cv_.wait(lock, [&] { return !idle_.empty() || created_ < cfg_.pool_size; });
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return Lease(*this, std::move(c));
    }
    ++created_;
    lock.unlock();
    auto c = std::make_unique<httplib::Client>(cfg_.endpoint);
    c->set_keep_alive(true);
    c->set_connection_timeout(cfg_.connect_timeout);
    c->set_read_timeout(cfg_.read_timeout);
    c->set_write_timeout(cfg_.read_timeout);
    return Lease(*this, std::move(c));
  }

  void release(std::unique_ptr<httplib::Client> c) {
    {
      std::lock_guard lock(pool_mutex_);
      idle_.push_back(std::move(c));
    }
    pool_cv_.notify_one();
  }

  json call(const std::string& method, const std::string& path, const json& req) {
    std::chrono::milliseconds delay = cfg_.backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        return call_once(method, path, req);
      } catch (const Error& e) {
        bool retryable = e.code() == ErrorCode::Timeout || (e.code() == ErrorCode::ServerError && server_side_);
        if (!retryable || attempt >= cfg_.attempts) {
          if (e.code() == ErrorCode::Timeout)
            throw Error(ErrorCode::Timeout, path + ": no response after " + std::to_string(attempt) + " attempts (" +
                                                e.what() + ")");
          throw;
        }
      }
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }

  json call_once(const std::string& method, const std::string& path, const json& req) {
    server_side_ = false;
    httplib::Result res;
    {
      Lease lease = acquire();
      if (method == "GET")
        res = (*lease).Get(path);
      else
        res = (*lease).Post(path, req.dump(), "application/json");
    }
    if (!res) throw Error(ErrorCode::Timeout, cfg_.endpoint + path + ": " + httplib::to_string(res.error()));
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception&) {
      if (res->status != 200)
        throw_server_error(res->status, res->body);
      throw Error(ErrorCode::ProtocolViolation, path + ": response is not JSON");
    }
    if (res->status != 200) {
      std::string msg = body.is_object() && body.contains("error") && body["error"].is_string()
                            ? body["error"].get<std::string>()
                            : res->body;
      throw_server_error(res->status, msg);
    }
    return body;
  }

  [[noreturn]] void throw_server_error(int status, const std::string& msg) {
    server_side_ = status >= 500;
    throw Error(ErrorCode::ServerError, "status " + std::to_string(status) + ": " + msg);
  }

  RemoteConfig cfg_;
  std::mutex pool_mutex_;
  std::condition_variable pool_cv_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
  size_t created_ = 0;
  static thread_local inline bool server_side_ = false;
};

}  // namespace patcher
