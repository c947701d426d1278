#pragma once

#include <cstdint>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pidet/envelope.hpp"
#include "pidet/gateway.hpp"

namespace pidet {

struct GatewayConfig {
  std::string model_path;
  std::string upstream_url;
  std::map<std::string, std::string> api_keys;  // key -> user_id
  std::set<std::string> admin_keys;
  PolicyConfig policy;
  std::string store_path;
  std::string alerts_path;
  std::optional<std::string> webhook_url;
  std::optional<std::string> debug_log_path;  // raw prompts, opt-in only
  std::string hash_salt = "pidet";
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
};

inline GatewayConfig gateway_config_from_json(const nlohmann::json& j) {
  GatewayConfig cfg;
  cfg.model_path = j.at("model_path").get<std::string>();
  if (j.contains("upstream")) cfg.upstream_url = j.at("upstream").value("url", "");
  if (j.contains("api_keys"))
    cfg.api_keys = j.at("api_keys").get<std::map<std::string, std::string>>();
  if (j.contains("admin_keys"))
    for (const auto& k : j.at("admin_keys")) cfg.admin_keys.insert(k.get<std::string>());
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    cfg.policy.requests_per_minute = p.value("requests_per_minute", cfg.policy.requests_per_minute);
    cfg.policy.ban_ratio = p.value("ban_ratio", cfg.policy.ban_ratio);
    cfg.policy.min_history = p.value("min_history", cfg.policy.min_history);
    cfg.policy.timeout_seconds = p.value("timeout_seconds", cfg.policy.timeout_seconds);
    cfg.policy.score_threshold = p.value("score_threshold", cfg.policy.score_threshold);
  }
  cfg.policy.validate();
  cfg.store_path = j.at("store").at("path").get<std::string>();
  cfg.alerts_path = cfg.store_path + ".alerts";
  if (j.contains("alert")) {
    const auto& a = j.at("alert");
    if (a.contains("path")) cfg.alerts_path = a.at("path").get<std::string>();
    if (a.contains("webhook_url")) cfg.webhook_url = a.at("webhook_url").get<std::string>();
  }
  if (j.contains("debug_log_path")) cfg.debug_log_path = j.at("debug_log_path").get<std::string>();
  cfg.hash_salt = j.value("hash_salt", cfg.hash_salt);
  if (j.contains("listen")) {
    cfg.listen_host = j.at("listen").value("host", cfg.listen_host);
    cfg.listen_port = j.at("listen").value("port", cfg.listen_port);
  }
  return cfg;
}

inline GatewayConfig load_gateway_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  try {
    return gateway_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
}

struct UpstreamResult {
  bool ok = false;
  std::string completion;
  std::string error;
};

class UpstreamClient {
 public:
  virtual ~UpstreamClient() = default;
  virtual UpstreamResult complete(const std::string& prompt) = 0;
};

// Test double: echoes a fixed prefix, or fails on demand.
class CannedUpstream : public UpstreamClient {
 public:
  explicit CannedUpstream(std::string reply = "OK", bool fail = false)
      : reply_(std::move(reply)), fail_(fail) {}

  void set_fail(bool fail) { fail_ = fail; }

  UpstreamResult complete(const std::string&) override {
    if (fail_) return {false, "", "upstream unavailable"};
    return {true, reply_, ""};
  }

 private:
  std::string reply_;
  bool fail_ = false;
};

namespace detail {

// "http://host:port/path" -> ("http://host:port", "/path")
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto slash = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

class HttpUpstream : public UpstreamClient {
 public:
  explicit HttpUpstream(const std::string& url) {
    auto [base, path] = detail::split_url(url);
    base_ = std::move(base);
    path_ = std::move(path);
  }

  UpstreamResult complete(const std::string& prompt) override {
    httplib::Client cli(base_);
    cli.set_connection_timeout(5, 0);
    cli.set_read_timeout(30, 0);
    const nlohmann::json body = {{"prompt", prompt}};
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res || res->status != 200) {
      return {false, "",
              res ? "upstream status " + std::to_string(res->status) : "upstream unreachable"};
    }
    try {
      return {true, nlohmann::json::parse(res->body).at("completion").get<std::string>(), ""};
    } catch (const std::exception& e) {
      return {false, "", std::string("upstream returned malformed body: ") + e.what()};
    }
  }

 private:
  std::string base_;
  std::string path_;
};

inline std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Policy-enforcing front door for an upstream LLM. Prompts are classified
// first; only benign verdicts are forwarded. All state changes flow through
// the append-only event store, so a restart replays to the same state.
class GatewayService {
 public:
  using Clock = std::function<std::int64_t()>;

  GatewayService(GatewayConfig cfg, ModelEnvelope model, std::unique_ptr<UpstreamClient> upstream,
                 Clock clock = system_now_ms)
      : cfg_(std::move(cfg)),
        model_(std::move(model)),
        upstream_(std::move(upstream)),
        clock_(std::move(clock)),
        store_(cfg_.store_path) {
    cfg_.policy.validate();
    users_ = load_state(store_, cfg_.policy, &corrupt_events_);
  }

  nlohmann::json classify_text(const std::string& text) const {
    const double score = model_.score(text);
    const bool malicious = score > cfg_.policy.score_threshold;
    return {{"verdict", malicious ? "malicious" : "benign"}, {"score", score}};
  }

  ApiResponse complete(const std::string& api_key, const std::string& prompt) {
    const auto key_it = cfg_.api_keys.find(api_key);
    if (api_key.empty() || key_it == cfg_.api_keys.end())
      return {401, {{"reason", "unauthenticated"}}};
    const std::string& user_id = key_it->second;
    const std::int64_t now = clock_();
    const std::string hash = prompt_hash(cfg_.hash_salt, prompt);

    // Phase 1: standing state and rate limit, before spending classifier work.
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto& rep = user_locked(user_id);
      if (rep.status == UserStatus::banned) {
        log_event({now, user_id, Verdict::benign, 0.0, Action::rejected_banned, hash});
        return {403, {{"reason", "banned"}}};
      }
      if (rep.timeout_until_ms && now < *rep.timeout_until_ms) {
        const double retry = static_cast<double>(*rep.timeout_until_ms - now) / 1000.0;
        log_event({now, user_id, Verdict::benign, 0.0, Action::rejected_timeout, hash});
        return {429, {{"reason", "timeout"}, {"retry_after_seconds", retry}}};
      }
      const auto rate = rate_limit_check(rep, now, cfg_.policy);
      if (!rate.allowed) {
        log_event({now, user_id, Verdict::benign, 0.0, Action::rate_limited, hash});
        return {429,
                {{"reason", "rate_limited"}, {"retry_after_seconds", rate.retry_after_seconds}}};
      }
    }

    const double score = model_.score(prompt);
    const Verdict verdict =
        score > cfg_.policy.score_threshold ? Verdict::malicious : Verdict::benign;

    PolicyOutcome outcome;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto& rep = user_locked(user_id);
      outcome = apply_policy(rep, verdict, now, cfg_.policy);
      log_event({now, user_id, verdict, score, outcome.action, hash});
      if (outcome.alert) record_alert(*outcome.alert);
      if (cfg_.debug_log_path) debug_log(now, user_id, prompt);
    }

    switch (outcome.action) {
      case Action::rejected_banned:
        return {403, {{"reason", "banned"}}};
      case Action::rejected_timeout:
        return {429,
                {{"reason", "timeout"}, {"retry_after_seconds", outcome.retry_after_seconds}}};
      case Action::banned:
        return {403, {{"reason", "banned"}}};
      case Action::warned_timeout:
        return {422,
                {{"reason", "prompt_flagged"},
                 {"warning", "prompt classified as an injection attempt; timeout applied"},
                 {"retry_after_seconds", outcome.retry_after_seconds}}};
      case Action::rate_limited:
        return {429, {{"reason", "rate_limited"}}};
      case Action::allowed:
        break;
    }

    const auto result = upstream_->complete(prompt);
    if (!result.ok) return {502, {{"reason", "upstream_failure"}, {"detail", result.error}}};
    return {200, {{"completion", result.completion}}};
  }

  ApiResponse user_info(const std::string& admin_key, const std::string& user_id) {
    if (cfg_.admin_keys.find(admin_key) == cfg_.admin_keys.end())
      return {401, {{"reason", "unauthenticated"}}};
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = users_.find(user_id);
    if (it == users_.end()) return {404, {{"reason", "unknown_user"}}};
    const auto& rep = it->second;
    nlohmann::json body = {{"total_prompts", rep.total_prompts},
                           {"flagged_prompts", rep.flagged_prompts},
                           {"attack_ratio", rep.attack_ratio()},
                           {"status", rep.status == UserStatus::banned ? "banned" : "active"}};
    body["timeout_until"] =
        rep.timeout_until_ms ? nlohmann::json(*rep.timeout_until_ms) : nlohmann::json(nullptr);
    return {200, body};
  }

  ApiResponse health() const {
    std::ofstream probe(cfg_.store_path, std::ios::binary | std::ios::app);
    if (!probe) return {503, {{"status", "store not writable"}}};
    return {200, {{"status", "ok"}}};
  }

  std::vector<AlertRecord> alerts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return alerts_;
  }

  std::optional<UserReputation> reputation(const std::string& user_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = users_.find(user_id);
    if (it == users_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t corrupt_events() const { return corrupt_events_; }
  const GatewayConfig& config() const { return cfg_; }

 private:
  UserReputation& user_locked(const std::string& user_id) {
    auto& rep = users_[user_id];
    if (rep.user_id.empty()) rep.user_id = user_id;
    return rep;
  }

  void log_event(const GatewayEvent& e) { store_.append(e); }

  void record_alert(const AlertRecord& alert) {
    alerts_.push_back(alert);
    std::ofstream out(cfg_.alerts_path, std::ios::binary | std::ios::app);
    if (out) {
      out << nlohmann::json{{"timestamp_ms", alert.timestamp_ms},
                            {"user_id", alert.user_id},
                            {"reason", alert.reason},
                            {"attack_ratio", alert.attack_ratio}}
                 .dump()
          << "\n";
    }
    if (cfg_.webhook_url) post_webhook(alert);
  }

  void post_webhook(const AlertRecord& alert) {
    auto [base, path] = detail::split_url(*cfg_.webhook_url);
    httplib::Client cli(base);
    cli.set_connection_timeout(2, 0);
    const nlohmann::json body = {{"user_id", alert.user_id},
                                 {"reason", alert.reason},
                                 {"attack_ratio", alert.attack_ratio}};
    cli.Post(path, body.dump(), "application/json");  // best effort
  }

  void debug_log(std::int64_t now, const std::string& user_id, const std::string& prompt) {
    std::ofstream out(*cfg_.debug_log_path, std::ios::binary | std::ios::app);
    if (out)
      out << nlohmann::json{{"timestamp_ms", now}, {"user_id", user_id}, {"prompt", prompt}}.dump()
          << "\n";
  }

  GatewayConfig cfg_;
  ModelEnvelope model_;
  std::unique_ptr<UpstreamClient> upstream_;
  Clock clock_;
  EventStore store_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, UserReputation> users_;
  std::vector<AlertRecord> alerts_;
  std::size_t corrupt_events_ = 0;
};

inline void attach_routes(httplib::Server& server, GatewayService& service) {
  const auto json_reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/v1/classify", [&service, json_reply](const httplib::Request& req,
                                                     httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body);
      json_reply(res, {200, service.classify_text(body.at("text").get<std::string>())});
    } catch (const nlohmann::json::exception&) {
      json_reply(res, {400, {{"reason", "bad_request"}, {"detail", "expected {\"text\": ...}"}}});
    }
  });
  server.Post("/v1/complete", [&service, json_reply](const httplib::Request& req,
                                                     httplib::Response& res) {
    std::string prompt;
    try {
      prompt = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      json_reply(res, {400, {{"reason", "bad_request"}, {"detail", "expected {\"prompt\": ...}"}}});
      return;
    }
    json_reply(res, service.complete(req.get_header_value("X-API-Key"), prompt));
  });
  server.Get(R"(/v1/users/([^/]+))", [&service, json_reply](const httplib::Request& req,
                                                            httplib::Response& res) {
    json_reply(res, service.user_info(req.get_header_value("X-API-Key"), req.matches[1]));
  });
  server.Get("/healthz", [&service, json_reply](const httplib::Request&, httplib::Response& res) {
    json_reply(res, service.health());
  });
  server.set_exception_handler(
      [json_reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        json_reply(res, {500, {{"reason", "internal_error"}, {"detail", what}}});
      });
}

}  // namespace pidet
