#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidet/manifest.hpp"

namespace pidet {

struct PolicyConfig {
  std::uint32_t requests_per_minute = 30;
  double ban_ratio = 0.5;
  std::uint32_t min_history = 10;
  std::uint64_t timeout_seconds = 300;
  double score_threshold = 0.5;

  void validate() const {
    if (requests_per_minute < 1)
      throw std::invalid_argument("policy: requests_per_minute must be >= 1");
    if (!(ban_ratio > 0.0 && ban_ratio <= 1.0))
      throw std::invalid_argument("policy: ban_ratio must be in (0, 1]");
    if (min_history < 1) throw std::invalid_argument("policy: min_history must be >= 1");
  }
};

enum class UserStatus { active, banned };

// Refill-on-demand token bucket. Capacity and rate come from the policy:
// capacity = requests_per_minute, rate = requests_per_minute / 60 per second.
struct TokenBucket {
  double tokens = 0.0;
  std::int64_t last_refill_ms = 0;
  bool initialized = false;
};

struct UserReputation {
  std::string user_id;
  std::uint64_t total_prompts = 0;
  std::uint64_t flagged_prompts = 0;
  UserStatus status = UserStatus::active;
  std::optional<std::int64_t> timeout_until_ms;
  TokenBucket bucket;

  double attack_ratio() const {
    return total_prompts == 0
               ? 0.0
               : static_cast<double>(flagged_prompts) / static_cast<double>(total_prompts);
  }
};

enum class Verdict { benign, malicious };

enum class Action { allowed, warned_timeout, banned, rate_limited, rejected_banned, rejected_timeout };

inline std::string to_string(Verdict v) { return v == Verdict::malicious ? "malicious" : "benign"; }

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "benign") return Verdict::benign;
  if (s == "malicious") return Verdict::malicious;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

inline std::string to_string(Action a) {
  switch (a) {
    case Action::allowed: return "allowed";
    case Action::warned_timeout: return "warned_timeout";
    case Action::banned: return "banned";
    case Action::rate_limited: return "rate_limited";
    case Action::rejected_banned: return "rejected_banned";
    case Action::rejected_timeout: return "rejected_timeout";
  }
  return "allowed";
}

inline Action action_from_string(const std::string& s) {
  if (s == "allowed") return Action::allowed;
  if (s == "warned_timeout") return Action::warned_timeout;
  if (s == "banned") return Action::banned;
  if (s == "rate_limited") return Action::rate_limited;
  if (s == "rejected_banned") return Action::rejected_banned;
  if (s == "rejected_timeout") return Action::rejected_timeout;
  throw std::invalid_argument("unknown action '" + s + "'");
}

struct GatewayEvent {
  std::int64_t timestamp_ms = 0;
  std::string user_id;
  Verdict verdict = Verdict::benign;
  double score = 0.0;
  Action action = Action::allowed;
  std::string prompt_hash;  // salted, never the raw text
};

struct AlertRecord {
  std::int64_t timestamp_ms = 0;
  std::string user_id;
  std::string reason;
  double attack_ratio = 0.0;
};

struct RateDecision {
  bool allowed = false;
  double retry_after_seconds = 0.0;
};

inline RateDecision rate_limit_check(UserReputation& rep, std::int64_t now_ms,
                                     const PolicyConfig& cfg) {
  const double capacity = static_cast<double>(cfg.requests_per_minute);
  const double rate = capacity / 60.0;  // tokens per second
  auto& b = rep.bucket;
  if (!b.initialized) {
    b.tokens = capacity;
    b.last_refill_ms = now_ms;
    b.initialized = true;
  } else if (now_ms > b.last_refill_ms) {
    const double elapsed = static_cast<double>(now_ms - b.last_refill_ms) / 1000.0;
    b.tokens = std::min(capacity, b.tokens + elapsed * rate);
    b.last_refill_ms = now_ms;
  }
  if (b.tokens >= 1.0) {
    b.tokens -= 1.0;
    return {true, 0.0};
  }
  return {false, (1.0 - b.tokens) / rate};
}

struct PolicyOutcome {
  Action action = Action::allowed;
  double retry_after_seconds = 0.0;
  std::optional<AlertRecord> alert;
};

// Reputation update for one classified prompt. Precedence: standing ban,
// then active timeout, then the verdict. A malicious verdict either bans
// (majority of history flagged, once min_history prompts are on record)
// or warns with a fresh timeout; it is never forwarded either way.
inline PolicyOutcome apply_policy(UserReputation& rep, Verdict verdict, std::int64_t now_ms,
                                  const PolicyConfig& cfg) {
  PolicyOutcome out;
  if (rep.status == UserStatus::banned) {
    out.action = Action::rejected_banned;
    return out;
  }
  if (rep.timeout_until_ms && now_ms < *rep.timeout_until_ms) {
    out.action = Action::rejected_timeout;
    out.retry_after_seconds = static_cast<double>(*rep.timeout_until_ms - now_ms) / 1000.0;
    return out;
  }
  rep.total_prompts += 1;
  if (verdict == Verdict::malicious) {
    rep.flagged_prompts += 1;
    if (rep.total_prompts >= cfg.min_history && rep.attack_ratio() > cfg.ban_ratio) {
      rep.status = UserStatus::banned;
      out.action = Action::banned;
      out.alert = AlertRecord{now_ms, rep.user_id, "attack ratio above ban threshold",
                              rep.attack_ratio()};
    } else {
      rep.timeout_until_ms = now_ms + static_cast<std::int64_t>(cfg.timeout_seconds) * 1000;
      out.action = Action::warned_timeout;
      out.retry_after_seconds = static_cast<double>(cfg.timeout_seconds);
    }
  } else {
    out.action = Action::allowed;
  }
  return out;
}

inline nlohmann::json event_to_json(const GatewayEvent& e) {
  return {{"timestamp_ms", e.timestamp_ms}, {"user_id", e.user_id},
          {"verdict", to_string(e.verdict)}, {"score", e.score},
          {"action", to_string(e.action)},   {"prompt_hash", e.prompt_hash}};
}

inline GatewayEvent event_from_json(const nlohmann::json& j) {
  GatewayEvent e;
  e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  e.user_id = j.at("user_id").get<std::string>();
  e.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  e.score = j.at("score").get<double>();
  e.action = action_from_string(j.at("action").get<std::string>());
  e.prompt_hash = j.value("prompt_hash", "");
  return e;
}

// Append-only line-delimited event log; the sole durable state of the
// gateway. Reputations are reconstructed by replay.
class EventStore {
 public:
  explicit EventStore(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  void append(const GatewayEvent& e) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("event store: cannot open " + path_);
    out << event_to_json(e).dump() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("event store: write failed for " + path_);
  }

  // Corrupt lines are skipped; their count is reported through `skipped`.
  std::vector<GatewayEvent> read_all(std::size_t* skipped = nullptr) const {
    std::vector<GatewayEvent> events;
    std::size_t bad = 0;
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
          events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception&) {
          ++bad;
        }
      }
    }
    if (skipped) *skipped = bad;
    return events;
  }

 private:
  std::string path_;
};

// Replays one event into the reputation map. Counter moves mirror
// apply_policy exactly so that replayed state equals live state.
inline void replay_event(std::unordered_map<std::string, UserReputation>& users,
                         const GatewayEvent& e, const PolicyConfig& cfg) {
  auto& rep = users[e.user_id];
  if (rep.user_id.empty()) rep.user_id = e.user_id;
  switch (e.action) {
    case Action::allowed:
      rep.total_prompts += 1;
      break;
    case Action::warned_timeout:
      rep.total_prompts += 1;
      rep.flagged_prompts += 1;
      rep.timeout_until_ms = e.timestamp_ms + static_cast<std::int64_t>(cfg.timeout_seconds) * 1000;
      break;
    case Action::banned:
      rep.total_prompts += 1;
      rep.flagged_prompts += 1;
      rep.status = UserStatus::banned;
      break;
    case Action::rate_limited:
    case Action::rejected_banned:
    case Action::rejected_timeout:
      break;  // no reputation movement
  }
}

inline std::unordered_map<std::string, UserReputation> load_state(const EventStore& store,
                                                                  const PolicyConfig& cfg,
                                                                  std::size_t* skipped = nullptr) {
  std::unordered_map<std::string, UserReputation> users;
  for (const auto& e : store.read_all(skipped)) replay_event(users, e, cfg);
  return users;
}

// Salted FNV hash of the prompt, the only form the event log stores.
inline std::string prompt_hash(const std::string& salt, const std::string& text) {
  const std::uint64_t h = fnv1a64(salt + "\x1f" + text);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pidet
