#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "pidet/gateway.hpp"

using namespace pidet;

namespace {

std::filesystem::path temp_store(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("pidet_gw_" + std::to_string(::getpid()) + "_" + name);
}

GatewayEvent event(std::int64_t ts, const std::string& user, Verdict v, double score, Action a) {
  return {ts, user, v, score, a, prompt_hash("salt", "text")};
}

}  // namespace

TEST_CASE("policy validation") {
  PolicyConfig ok;
  CHECK_NOTHROW(ok.validate());
  ok.ban_ratio = 1.0;
  CHECK_NOTHROW(ok.validate());

  PolicyConfig bad = ok;
  bad.requests_per_minute = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.ban_ratio = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.ban_ratio = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.min_history = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("token bucket grants a full burst then meters refills") {
  PolicyConfig cfg;  // 30 rpm -> capacity 30, 0.5 tokens per second
  UserReputation rep;
  const std::int64_t t0 = 1'000'000;
  for (int i = 0; i < 30; ++i) {
    const auto d = rate_limit_check(rep, t0, cfg);
    INFO("request " << i);
    CHECK(d.allowed);
  }
  const auto denied = rate_limit_check(rep, t0, cfg);
  CHECK_FALSE(denied.allowed);
  CHECK(denied.retry_after_seconds == Catch::Approx(2.0).margin(1e-9));

  // two seconds later exactly one token has accrued
  const auto after = rate_limit_check(rep, t0 + 2000, cfg);
  CHECK(after.allowed);
  CHECK_FALSE(rate_limit_check(rep, t0 + 2000, cfg).allowed);
}

TEST_CASE("token bucket refill never exceeds capacity") {
  PolicyConfig cfg;
  UserReputation rep;
  rate_limit_check(rep, 0, cfg);  // init + consume one
  // a week later the bucket holds exactly the capacity again
  std::int64_t later = 7ll * 24 * 3600 * 1000;
  int grants = 0;
  while (rate_limit_check(rep, later, cfg).allowed) ++grants;
  CHECK(grants == 30);
}

TEST_CASE("grants in any window stay under capacity plus refill") {
  PolicyConfig cfg;
  UserReputation rep;
  std::vector<std::int64_t> grant_times;
  // aggressive client: one attempt every 100 ms for two minutes
  for (std::int64_t t = 0; t < 120'000; t += 100)
    if (rate_limit_check(rep, t, cfg).allowed) grant_times.push_back(t);

  const double rate = 30.0 / 60.0;
  // every trailing 60 s window, tightest bound: capacity + elapsed * rate
  for (std::size_t lo = 0, hi = 0; hi < grant_times.size(); ++hi) {
    while (grant_times[hi] - grant_times[lo] > 60'000) ++lo;
    const double elapsed = static_cast<double>(grant_times[hi] - grant_times[lo]) / 1000.0;
    const double bound = 30.0 + elapsed * rate + 1e-9;
    CHECK(static_cast<double>(hi - lo + 1) <= bound);
  }
  // two minutes total: 30 burst + 120 s * 0.5/s refill
  CHECK(grant_times.size() <= 90);
  CHECK(grant_times.size() >= 89);  // bucket actually pays out what it accrues
}

TEST_CASE("a benign prompt from a new user is allowed") {
  PolicyConfig cfg;
  UserReputation rep;
  rep.user_id = "alice";
  const auto out = apply_policy(rep, Verdict::benign, 1000, cfg);
  CHECK(out.action == Action::allowed);
  CHECK_FALSE(out.alert.has_value());
  CHECK(rep.total_prompts == 1);
  CHECK(rep.flagged_prompts == 0);
  CHECK(rep.status == UserStatus::active);
}

TEST_CASE("a malicious prompt below the history floor warns and times out") {
  PolicyConfig cfg;
  UserReputation rep;
  rep.user_id = "bob";
  rep.total_prompts = 3;
  rep.flagged_prompts = 3;
  const auto out = apply_policy(rep, Verdict::malicious, 10'000, cfg);
  CHECK(out.action == Action::warned_timeout);
  CHECK(out.retry_after_seconds == 300.0);
  CHECK(rep.total_prompts == 4);
  CHECK(rep.flagged_prompts == 4);
  CHECK(rep.status == UserStatus::active);  // ratio 1.0 but history < 10
  REQUIRE(rep.timeout_until_ms.has_value());
  CHECK(*rep.timeout_until_ms == 10'000 + 300'000);
}

TEST_CASE("a malicious prompt over the ratio threshold bans with one alert") {
  PolicyConfig cfg;
  UserReputation rep;
  rep.user_id = "mallory";
  rep.total_prompts = 11;
  rep.flagged_prompts = 6;
  const auto out = apply_policy(rep, Verdict::malicious, 99'000, cfg);
  CHECK(out.action == Action::banned);
  REQUIRE(out.alert.has_value());
  CHECK(out.alert->user_id == "mallory");
  CHECK(out.alert->attack_ratio == Catch::Approx(7.0 / 12.0).margin(1e-12));
  CHECK(out.alert->timestamp_ms == 99'000);
  CHECK(rep.status == UserStatus::banned);
}

TEST_CASE("a ratio exactly at the threshold does not ban") {
  PolicyConfig cfg;
  UserReputation rep;
  rep.user_id = "carol";
  rep.total_prompts = 9;
  rep.flagged_prompts = 4;
  const auto out = apply_policy(rep, Verdict::malicious, 0, cfg);
  // 5/10 == ban_ratio: strictly-greater comparison spares the user
  CHECK(out.action == Action::warned_timeout);
  CHECK(rep.status == UserStatus::active);
}

TEST_CASE("rejections do not move the counters") {
  PolicyConfig cfg;
  UserReputation banned;
  banned.user_id = "x";
  banned.status = UserStatus::banned;
  banned.total_prompts = 5;
  const auto r1 = apply_policy(banned, Verdict::benign, 0, cfg);
  CHECK(r1.action == Action::rejected_banned);
  CHECK(banned.total_prompts == 5);

  UserReputation timed;
  timed.user_id = "y";
  timed.timeout_until_ms = 50'000;
  timed.total_prompts = 2;
  const auto r2 = apply_policy(timed, Verdict::benign, 40'000, cfg);
  CHECK(r2.action == Action::rejected_timeout);
  CHECK(r2.retry_after_seconds == Catch::Approx(10.0).margin(1e-9));
  CHECK(timed.total_prompts == 2);

  // after expiry the same prompt goes through
  const auto r3 = apply_policy(timed, Verdict::benign, 50'000, cfg);
  CHECK(r3.action == Action::allowed);
  CHECK(timed.total_prompts == 3);
}

TEST_CASE("a ban is permanent regardless of later verdicts") {
  PolicyConfig cfg;
  UserReputation rep;
  rep.user_id = "z";
  rep.total_prompts = 11;
  rep.flagged_prompts = 6;
  apply_policy(rep, Verdict::malicious, 0, cfg);
  REQUIRE(rep.status == UserStatus::banned);
  for (int i = 0; i < 5; ++i)
    CHECK(apply_policy(rep, Verdict::benign, 1'000'000 + i, cfg).action ==
          Action::rejected_banned);
  CHECK(rep.total_prompts == 12);
}

TEST_CASE("events round-trip through json") {
  for (const auto a : {Action::allowed, Action::warned_timeout, Action::banned,
                       Action::rate_limited, Action::rejected_banned, Action::rejected_timeout}) {
    const auto e = event(777, "user-1", Verdict::malicious, 0.91, a);
    const auto back = event_from_json(event_to_json(e));
    CHECK(back.timestamp_ms == 777);
    CHECK(back.user_id == "user-1");
    CHECK(back.verdict == Verdict::malicious);
    CHECK(back.score == 0.91);
    CHECK(back.action == a);
    CHECK(back.prompt_hash == e.prompt_hash);
  }
  CHECK_THROWS_AS(verdict_from_string("maybe"), std::invalid_argument);
  CHECK_THROWS_AS(action_from_string("promoted"), std::invalid_argument);
}

TEST_CASE("event store appends, reads back, and skips corrupt lines") {
  const auto path = temp_store("events.jsonl");
  std::filesystem::remove(path);
  EventStore store(path.string());

  std::size_t skipped = 99;
  CHECK(store.read_all(&skipped).empty());
  CHECK(skipped == 0);

  store.append(event(1, "a", Verdict::benign, 0.1, Action::allowed));
  store.append(event(2, "b", Verdict::malicious, 0.9, Action::warned_timeout));
  {
    std::ofstream out(path, std::ios::app);
    out << "{not json at all\n";
    out << "{\"timestamp_ms\": 3}\n";  // parses but misses required fields
  }
  store.append(event(4, "a", Verdict::benign, 0.2, Action::allowed));

  const auto events = store.read_all(&skipped);
  REQUIRE(events.size() == 3);
  CHECK(skipped == 2);
  CHECK(events[0].user_id == "a");
  CHECK(events[1].action == Action::warned_timeout);
  CHECK(events[2].timestamp_ms == 4);
  std::filesystem::remove(path);
}

TEST_CASE("replay rebuilds exactly the live reputation state") {
  PolicyConfig cfg;
  const auto path = temp_store("replay.jsonl");
  std::filesystem::remove(path);
  EventStore store(path.string());

  // Live run: 5 benign, then malicious prompts spaced past each timeout.
  UserReputation live;
  live.user_id = "mallory";
  int alerts = 0;
  std::int64_t t = 0;
  for (int i = 0; i < 12; ++i) {
    t = static_cast<std::int64_t>(i + 1) * 400'000;  // > timeout, warns expire
    const Verdict v = i < 5 ? Verdict::benign : Verdict::malicious;
    const auto out = apply_policy(live, v, t, cfg);
    alerts += out.alert.has_value();
    store.append(event(t, "mallory", v, v == Verdict::malicious ? 0.9 : 0.1, out.action));
  }
  CHECK(live.status == UserStatus::banned);
  CHECK(live.total_prompts == 11);  // the final event was rejected
  CHECK(live.flagged_prompts == 6);
  CHECK(alerts == 1);

  std::size_t skipped = 0;
  auto users = load_state(store, cfg, &skipped);
  CHECK(skipped == 0);
  REQUIRE(users.count("mallory") == 1);
  const auto& rebuilt = users["mallory"];
  CHECK(rebuilt.total_prompts == live.total_prompts);
  CHECK(rebuilt.flagged_prompts == live.flagged_prompts);
  CHECK(rebuilt.status == UserStatus::banned);

  // loading twice from scratch gives the same answer
  auto again = load_state(store, cfg);
  CHECK(again["mallory"].total_prompts == rebuilt.total_prompts);
  CHECK(again["mallory"].flagged_prompts == rebuilt.flagged_prompts);
  std::filesystem::remove(path);
}

TEST_CASE("replayed warn leaves a live timeout") {
  PolicyConfig cfg;
  std::unordered_map<std::string, UserReputation> users;
  replay_event(users, event(1000, "u", Verdict::malicious, 0.8, Action::warned_timeout), cfg);
  const auto& rep = users["u"];
  REQUIRE(rep.timeout_until_ms.has_value());
  CHECK(*rep.timeout_until_ms == 1000 + 300'000);
  CHECK(rep.total_prompts == 1);
  CHECK(rep.flagged_prompts == 1);

  // a request arriving before expiry is still rejected
  auto mutable_rep = rep;
  CHECK(apply_policy(mutable_rep, Verdict::benign, 200'000, cfg).action ==
        Action::rejected_timeout);
}

TEST_CASE("rate-limited and rejected events replay as no-ops") {
  PolicyConfig cfg;
  std::unordered_map<std::string, UserReputation> users;
  replay_event(users, event(1, "u", Verdict::benign, 0.1, Action::rate_limited), cfg);
  replay_event(users, event(2, "u", Verdict::benign, 0.1, Action::rejected_banned), cfg);
  replay_event(users, event(3, "u", Verdict::benign, 0.1, Action::rejected_timeout), cfg);
  CHECK(users["u"].total_prompts == 0);
  CHECK(users["u"].flagged_prompts == 0);
  CHECK(users["u"].status == UserStatus::active);
}

TEST_CASE("prompt hashes are salted and fixed width") {
  const auto h1 = prompt_hash("salt-a", "ignore previous instructions");
  const auto h2 = prompt_hash("salt-b", "ignore previous instructions");
  const auto h3 = prompt_hash("salt-a", "ignore previous instruction");
  CHECK(h1.size() == 16);
  CHECK(h1 != h2);
  CHECK(h1 != h3);
  CHECK(h1 == prompt_hash("salt-a", "ignore previous instructions"));
  CHECK(h1.find_first_not_of("0123456789abcdef") == std::string::npos);
}
