#pragma once

// Campaign orchestration: the select -> render -> generate -> execute ->
// compare -> reward loop, with a crash-safe checkpoint.
//
// Per-round randomness is derived from (seed, round number) only, so a round
// replayed after a crash follows the same path. Round artifacts (trace file,
// JSON-lines report) are written before the checkpoint that accounts for the
// round is committed.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conndiff/bandit.hpp"
#include "conndiff/differential.hpp"
#include "conndiff/generator.hpp"
#include "conndiff/prompt.hpp"
#include "conndiff/props.hpp"

namespace conndiff {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct RemoteSettings {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "CONNDIFF_API_KEY";
  int timeout_seconds = 60;
  int max_retries = 3;
  int max_in_flight = 4;
  bool operator==(const RemoteSettings&) const = default;
};

struct CampaignConfig {
  std::int64_t rounds = 1;
  std::uint64_t seed = 0;
  std::string prompt_set;       // paths as written; resolved against base_dir
  std::string property_schema;
  SubsetStrategy subset_strategy = SubsetStrategy::DefaultsPlusSingleFlips;
  std::size_t subset_k = 8;
  std::uint64_t subset_seed = 0;
  std::string generator = "stub";  // stub | remote
  RemoteSettings remote;
  DivergenceCatalog divergence;
  std::uint64_t reward_cap = 5;
  std::set<CompareMode> modes = {CompareMode::CrossConnector, CompareMode::CrossProperty};
  bool message_sensitive = true;
  std::string output_dir = "campaign-out";
  std::string base_dir = ".";  // directory of the config file; not serialized

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : (fs::path(base_dir) / path).lexically_normal();
  }
};

inline constexpr std::string_view kCampaignMagic = "conndiff-campaign";

inline std::string modes_to_string(const std::set<CompareMode>& modes) {
  std::vector<std::string> parts;
  for (auto m : modes) parts.push_back(to_string(m));
  return join(parts, ",");
}

inline bool parse_switch(const std::string& v, int line) {
  if (v == "on" || v == "true") return true;
  if (v == "off" || v == "false") return false;
  throw ParseError("expected on/off, got '" + v + "'", line);
}

inline CampaignConfig parse_campaign_config(std::string_view text, std::string base_dir = ".") {
  const auto doc = parse_records(text, kCampaignMagic);
  CampaignConfig c;
  c.base_dir = std::move(base_dir);
  bool saw_campaign = false, saw_inputs = false;
  auto positive = [](const Record& r, std::string_view key) {
    const auto v = r.get_int(key);
    if (v < 1) throw ParseError("field '" + std::string(key) + "' must be at least 1", r.line);
    return v;
  };
  for (const auto& r : doc.records) {
    if (!r.args.empty()) throw ParseError("'" + r.keyword + "' takes only key=value fields", r.line);
    if (r.keyword == "campaign") {
      r.expect_fields({"rounds", "seed", "output-dir", "reward-cap"});
      c.rounds = positive(r, "rounds");
      c.seed = static_cast<std::uint64_t>(r.get_int("seed"));
      if (r.find("output-dir")) c.output_dir = r.get("output-dir");
      if (r.find("reward-cap")) c.reward_cap = static_cast<std::uint64_t>(positive(r, "reward-cap"));
      saw_campaign = true;
    } else if (r.keyword == "inputs") {
      r.expect_fields({"prompt-set", "property-schema"});
      c.prompt_set = r.get("prompt-set");
      c.property_schema = r.get("property-schema");
      saw_inputs = true;
    } else if (r.keyword == "subsets") {
      r.expect_fields({"strategy", "k", "seed"});
      try {
        c.subset_strategy = parse_strategy(r.get("strategy"));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(e.what(), r.line);
      }
      c.subset_k = static_cast<std::size_t>(positive(r, "k"));
      if (r.find("seed")) c.subset_seed = static_cast<std::uint64_t>(r.get_int("seed"));
    } else if (r.keyword == "generator") {
      r.expect_fields({"kind"});
      c.generator = r.get("kind");
      if (c.generator != "stub" && c.generator != "remote")
        throw ParseError("generator kind must be stub or remote", r.line);
    } else if (r.keyword == "remote") {
      r.expect_fields({"endpoint", "model", "api-key-env", "timeout", "retries", "in-flight"});
      if (r.find("endpoint")) c.remote.endpoint = r.get("endpoint");
      if (r.find("model")) c.remote.model = r.get("model");
      if (r.find("api-key-env")) c.remote.api_key_env = r.get("api-key-env");
      if (r.find("timeout")) c.remote.timeout_seconds = static_cast<int>(positive(r, "timeout"));
      if (r.find("retries")) c.remote.max_retries = static_cast<int>(r.get_int("retries"));
      if (r.find("in-flight")) c.remote.max_in_flight = static_cast<int>(positive(r, "in-flight"));
      if (c.remote.max_retries < 0) throw ParseError("retries must be non-negative", r.line);
    } else if (r.keyword == "divergence") {
      for (const auto& [k, v] : r.fields) {
        Rule rule;
        try {
          rule = parse_rule(k);
        } catch (const Error& e) {
          throw ParseError(e.what(), r.line);
        }
        if (parse_switch(v, r.line)) c.divergence.rules.insert(rule);
        else c.divergence.rules.erase(rule);
      }
    } else if (r.keyword == "compare") {
      r.expect_fields({"modes", "message-sensitive"});
      if (r.find("modes")) {
        c.modes.clear();
        for (const auto& m : split(r.get("modes"), ',')) {
          try {
            c.modes.insert(parse_compare_mode(trim(m)));
          } catch (const Error& e) {
            throw ParseError(e.what(), r.line);
          }
        }
        if (c.modes.empty()) throw ParseError("at least one comparison mode is required", r.line);
      }
      if (r.find("message-sensitive")) c.message_sensitive = parse_switch(r.get("message-sensitive"), r.line);
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  if (!saw_campaign) throw ParseError("missing 'campaign' record");
  if (!saw_inputs) throw ParseError("missing 'inputs' record");
  if (c.generator == "remote" && c.remote.endpoint.empty())
    throw ParseError("remote generator requires 'remote endpoint=...'");
  return c;
}

/// Canonical text; `with_rounds=false` omits the round count (which may grow
/// between resumes without invalidating a checkpoint).
inline std::string serialize_campaign_config(const CampaignConfig& c, bool with_rounds = true) {
  RecordWriter w(kCampaignMagic, 1);
  w.begin("campaign");
  if (with_rounds) w.field("rounds", c.rounds);
  w.field("seed", std::to_string(c.seed)).field("output-dir", c.output_dir).field("reward-cap", std::to_string(c.reward_cap));
  w.begin("inputs").field("prompt-set", c.prompt_set).field("property-schema", c.property_schema);
  w.begin("subsets")
      .field("strategy", to_string(c.subset_strategy))
      .field("k", std::to_string(c.subset_k))
      .field("seed", std::to_string(c.subset_seed));
  w.begin("generator").field("kind", c.generator);
  if (c.generator == "remote") {
    w.begin("remote")
        .field("endpoint", c.remote.endpoint)
        .field("model", c.remote.model)
        .field("api-key-env", c.remote.api_key_env)
        .field("timeout", c.remote.timeout_seconds)
        .field("retries", c.remote.max_retries)
        .field("in-flight", c.remote.max_in_flight);
  }
  w.begin("divergence");
  for (auto r : kAllRules) w.field(to_string(r), c.divergence.has(r) ? "on" : "off");
  w.begin("compare").field("modes", modes_to_string(c.modes)).field("message-sensitive", c.message_sensitive ? "on" : "off");
  return w.str();
}

/// Everything a campaign needs, loaded and cross-checked.
struct CampaignInputs {
  CampaignConfig config;
  PropertySchema schema;
  SubsetCatalog catalog;
  PromptSet prompt_set;
  std::vector<Prompt> prompts;
  std::string config_hash;
};

inline CampaignInputs load_inputs(CampaignConfig config) {
  auto read = [&](const std::string& what, const std::string& p) {
    const auto path = config.resolve(p);
    if (!fs::exists(path)) throw Error(what + " not found: " + path.string());
    return read_file(path.string());
  };
  const auto schema_text = read("property schema", config.property_schema);
  const auto prompts_text = read("prompt set", config.prompt_set);
  auto wrap = [](const std::string& what, auto&& fn) {
    try {
      return fn();
    } catch (const ParseError& e) {
      throw Error(what + ": " + e.what());
    }
  };
  auto schema = wrap("property schema", [&] { return parse_schema(schema_text); });
  auto set = wrap("prompt set", [&] { return parse_prompt_set(prompts_text); });
  auto catalog = curate_subsets(schema, config.subset_k, config.subset_strategy, config.subset_seed);
  auto prompts = instantiate_candidates(set.tmpl, set.groups);

  std::uint64_t h = fnv1a64(serialize_campaign_config(config, false));
  h = fnv1a64(schema_text, h);
  h = fnv1a64(prompts_text, h);
  CampaignInputs in{std::move(config), std::move(schema), std::move(catalog), std::move(set), std::move(prompts),
                    hex64(h)};
  return in;
}

inline CampaignInputs load_campaign_file(const std::string& path) {
  if (!fs::exists(path)) throw Error("config not found: " + path);
  auto parent = fs::path(path).parent_path();
  CampaignConfig c;
  try {
    c = parse_campaign_config(read_file(path), parent.empty() ? "." : parent.string());
  } catch (const ParseError& e) {
    throw Error("config " + path + ": " + e.what());
  }
  return load_inputs(std::move(c));
}

// ---------------------------------------------------------------------------
// Checkpoint

enum class RoundStatus { Ok, ParseFailure, Failed };

inline std::string to_string(RoundStatus s) {
  switch (s) {
    case RoundStatus::Ok: return "ok";
    case RoundStatus::ParseFailure: return "parse-failure";
    case RoundStatus::Failed: return "failed";
  }
  return "?";
}

inline RoundStatus parse_round_status(std::string_view s) {
  if (s == "ok") return RoundStatus::Ok;
  if (s == "parse-failure") return RoundStatus::ParseFailure;
  if (s == "failed") return RoundStatus::Failed;
  throw Error("unknown round status: " + std::string(s));
}

struct RoundLogEntry {
  std::int64_t round = 0;
  std::string prompt_id;
  RoundStatus status = RoundStatus::Ok;
  std::string trace_file;   // relative to the output directory; empty without a trace
  std::uint64_t raw_reward = 0;
  std::uint64_t discrepancies = 0;
  std::uint64_t bugs = 0;
  std::uint64_t unsafe = 0;
  /// Distinct "R2+R6:Bug"-style attributions of this round's discrepancies.
  std::vector<std::string> attributions;
  /// Cursor kinds of forward-only navigation classified as unsafe.
  std::vector<std::string> unsafe_kinds;
  std::string note;  // failure reason

  bool operator==(const RoundLogEntry&) const = default;
};

struct CampaignCheckpoint {
  std::string config_hash;
  BanditState bandit;
  std::int64_t completed_rounds = 0;  // == bandit.total_rounds
  std::int64_t attempted_rounds = 0;  // includes failed rounds; the rng cursor
  std::uint64_t rng_seed = 0;
  std::vector<RoundLogEntry> log;

  bool operator==(const CampaignCheckpoint&) const = default;
};

inline constexpr std::string_view kCheckpointMagic = "conndiff-checkpoint";

inline std::string serialize_checkpoint(const CampaignCheckpoint& c) {
  RecordWriter w(kCheckpointMagic, 1);
  w.begin("checkpoint")
      .field("config-hash", c.config_hash)
      .field("completed", c.completed_rounds)
      .field("attempted", c.attempted_rounds)
      .field("rng-seed", std::to_string(c.rng_seed))
      .field("reward-cap", std::to_string(c.bandit.reward_cap))
      .field("total-rounds", std::to_string(c.bandit.total_rounds));
  for (const auto& a : c.bandit.arms)
    w.begin("arm")
        .field("id", a.prompt_id)
        .field("pulls", std::to_string(a.pulls))
        .field("reward-units", std::to_string(a.reward_units))
        .field("fingerprint", a.fingerprint);
  for (const auto& e : c.log) {
    w.begin("log")
        .field("round", e.round)
        .field("prompt", e.prompt_id)
        .field("status", to_string(e.status))
        .field("trace", e.trace_file)
        .field("reward", std::to_string(e.raw_reward))
        .field("discrepancies", std::to_string(e.discrepancies))
        .field("bugs", std::to_string(e.bugs))
        .field("unsafe", std::to_string(e.unsafe))
        .field("attributions", join(e.attributions, ","))
        .field("unsafe-kinds", join(e.unsafe_kinds, ","));
    if (!e.note.empty()) w.field("note", e.note);
  }
  return w.str();
}

inline CampaignCheckpoint parse_checkpoint(std::string_view text) {
  const auto doc = parse_records(text, kCheckpointMagic);
  CampaignCheckpoint c;
  bool header = false;
  auto u64 = [](const Record& r, std::string_view k) {
    const auto v = r.get_int(k);
    if (v < 0) throw ParseError("field '" + std::string(k) + "' must be non-negative", r.line);
    return static_cast<std::uint64_t>(v);
  };
  auto list = [](const std::string& s) { return s.empty() ? std::vector<std::string>{} : split(s, ','); };
  for (const auto& r : doc.records) {
    if (r.keyword == "checkpoint") {
      r.expect_fields({"config-hash", "completed", "attempted", "rng-seed", "reward-cap", "total-rounds"});
      c.config_hash = r.get("config-hash");
      c.completed_rounds = r.get_int("completed");
      c.attempted_rounds = r.get_int("attempted");
      c.rng_seed = u64(r, "rng-seed");
      c.bandit.reward_cap = u64(r, "reward-cap");
      c.bandit.total_rounds = u64(r, "total-rounds");
      header = true;
    } else if (r.keyword == "arm") {
      r.expect_fields({"id", "pulls", "reward-units", "fingerprint"});
      c.bandit.arms.push_back({r.get("id"), u64(r, "pulls"), u64(r, "reward-units"), c.bandit.reward_cap,
                               r.find("fingerprint") ? r.get("fingerprint") : ""});
    } else if (r.keyword == "log") {
      r.expect_fields({"round", "prompt", "status", "trace", "reward", "discrepancies", "bugs", "unsafe",
                       "attributions", "unsafe-kinds", "note"});
      RoundLogEntry e;
      e.round = r.get_int("round");
      e.prompt_id = r.get("prompt");
      try {
        e.status = parse_round_status(r.get("status"));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& err) {
        throw ParseError(err.what(), r.line);
      }
      e.trace_file = r.get("trace");
      e.raw_reward = u64(r, "reward");
      e.discrepancies = u64(r, "discrepancies");
      e.bugs = u64(r, "bugs");
      e.unsafe = u64(r, "unsafe");
      e.attributions = list(r.get("attributions"));
      e.unsafe_kinds = list(r.get("unsafe-kinds"));
      if (r.find("note")) e.note = r.get("note");
      c.log.push_back(std::move(e));
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  if (!header) throw ParseError("missing checkpoint record");
  std::uint64_t pulls = 0;
  for (const auto& a : c.bandit.arms) pulls += a.pulls;
  if (pulls != c.bandit.total_rounds || static_cast<std::uint64_t>(c.completed_rounds) != c.bandit.total_rounds)
    throw ParseError("checkpoint accounting is inconsistent (pulls, total rounds, completed rounds differ)");
  if (c.attempted_rounds < c.completed_rounds || static_cast<std::int64_t>(c.log.size()) != c.attempted_rounds)
    throw ParseError("checkpoint log does not match attempted rounds");
  return c;
}

inline CampaignCheckpoint fresh_checkpoint(const CampaignInputs& in) {
  std::vector<std::string> ids, prints;
  for (const auto& p : in.prompts) {
    ids.push_back(p.id);
    prints.push_back(p.fingerprint());
  }
  CampaignCheckpoint c;
  c.config_hash = in.config_hash;
  c.bandit = BanditState::fresh(ids, in.config.reward_cap, prints);
  c.rng_seed = in.config.seed;
  return c;
}

// ---------------------------------------------------------------------------
// Rounds

using GeneratorFactory = std::function<std::unique_ptr<Generator>(const CampaignInputs&)>;

inline std::unique_ptr<Generator> make_stub_generator(const CampaignInputs& in) {
  return std::make_unique<StubGenerator>(in.prompt_set.grammar);
}

inline std::uint64_t round_seed(std::uint64_t seed, std::int64_t round) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round)));
}

inline std::string round_name(std::int64_t round) {
  std::string n = std::to_string(round);
  return "r" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

struct RoundReport {
  RoundLogEntry entry;
  std::optional<Trace> trace;
  std::vector<Discrepancy> discrepancies;
  std::vector<Classification> classifications;
  std::string report_jsonl;
};

inline std::string attribution_of(const Discrepancy& d, const Classification& c) {
  const std::string rules = d.rules.empty() ? "unattributed" : join({d.rules.begin(), d.rules.end()}, "+");
  return rules + ":" + to_string(c.verdict);
}

/// Pure part of a round: no files touched, checkpoint not advanced.
inline RoundReport execute_round(const CampaignInputs& in, const CampaignCheckpoint& cp, Generator& generator,
                                 std::int64_t round) {
  RoundReport rep;
  auto& e = rep.entry;
  e.round = round;
  Rng rng(round_seed(cp.rng_seed, round));
  const auto arm = select_arm_index(cp.bandit);
  const Prompt& prompt = in.prompts.at(arm);
  e.prompt_id = prompt.id;

  const auto assignments = in.catalog.flattened();
  const auto assignment = sample(in.catalog, rng);
  std::vector<PropertyAssignment> others;
  for (const auto& a : assignments)
    if (a != assignment) others.push_back(a);
  std::vector<PropertyAssignment> alternates;
  if (!others.empty()) alternates.push_back(others[uniform_index(rng, others.size())]);

  GeneratorRequest req{render(prompt, assignment), prompt.focus_group, assignment, rng()};
  GeneratorOutput out;
  try {
    out = generator.generate(req);
  } catch (const TransportError& err) {
    e.status = RoundStatus::Failed;
    e.note = err.what();
    return rep;
  }

  nlohmann::json head;
  head["round"] = round;
  head["prompt_id"] = prompt.id;
  head["focus_group"] = to_string(prompt.focus_group);
  head["assignment"] = assignment.to_string();
  head["alternate"] = alternates.empty() ? "" : alternates.front().to_string();
  head["rewrites"] = out.rewrites_applied;

  if (const auto* t = out.trace()) {
    Trace trace = *t;
    trace.id = round_name(round);
    trace.property_assignment = assignment;
    trace.provenance = PromptProvenance{prompt.id, round};
    const DifferentialSetup setup{in.config.divergence, in.config.modes, in.config.message_sensitive};
    auto result = run_differential(trace, setup, alternates);
    std::set<std::string> attributions, kinds;
    std::string lines;
    for (const auto& d : result.discrepancies) {
      auto c = classify(d);
      (c.verdict == Verdict::Bug ? e.bugs : e.unsafe) += 1;
      attributions.insert(attribution_of(d, c));
      if (c.verdict == Verdict::UnsafeImplementation && is_forward_only_navigation(d))
        kinds.insert(to_string(std::get<op::CursorMove>(*d.op).kind));
      auto j = to_json(d, c);
      j["round"] = round;
      lines += j.dump() + "\n";
      rep.classifications.push_back(std::move(c));
    }
    e.discrepancies = result.discrepancies.size();
    e.raw_reward = reward_of(result.discrepancies);
    e.attributions.assign(attributions.begin(), attributions.end());
    e.unsafe_kinds.assign(kinds.begin(), kinds.end());
    e.trace_file = "traces/" + round_name(round) + ".trace";
    head["status"] = "ok";
    head["trace"] = e.trace_file;
    head["reward"] = e.raw_reward;
    head["discrepancies"] = e.discrepancies;
    rep.report_jsonl = head.dump() + "\n" + lines;
    rep.discrepancies = std::move(result.discrepancies);
    rep.trace = std::move(trace);
  } else {
    e.status = RoundStatus::ParseFailure;
    e.note = std::get<ParseFailure>(out.parsed).reason;
    head["status"] = "parse-failure";
    head["reason"] = e.note;
    head["reward"] = 0;
    rep.report_jsonl = head.dump() + "\n";
  }
  return rep;
}

/// Applies a round to the checkpoint: failed rounds leave the bandit alone.
inline CampaignCheckpoint advance(CampaignCheckpoint cp, const RoundLogEntry& e) {
  if (e.round != cp.attempted_rounds + 1) throw Error("advance: round " + std::to_string(e.round) + " is out of order");
  if (e.status != RoundStatus::Failed) {
    cp.bandit = update(std::move(cp.bandit), e.prompt_id, e.raw_reward);
    cp.completed_rounds += 1;
  }
  cp.attempted_rounds += 1;
  cp.log.push_back(e);
  return cp;
}

inline fs::path output_dir(const CampaignInputs& in) { return in.config.resolve(in.config.output_dir); }
inline fs::path checkpoint_path(const CampaignInputs& in) { return output_dir(in) / "checkpoint.cdc"; }

/// One full round with persistence: artifacts first, checkpoint last.
inline std::pair<CampaignCheckpoint, RoundReport> run_round(const CampaignInputs& in, const CampaignCheckpoint& cp,
                                                            Generator& generator) {
  const auto round = cp.attempted_rounds + 1;
  auto rep = execute_round(in, cp, generator, round);
  const auto dir = output_dir(in);
  fs::create_directories(dir / "rounds");
  fs::create_directories(dir / "traces");
  if (rep.trace) write_file_atomic((dir / rep.entry.trace_file).string(), serialize(*rep.trace));
  if (!rep.report_jsonl.empty())
    write_file_atomic((dir / "rounds" / (round_name(round) + ".jsonl")).string(), rep.report_jsonl);
  auto next = advance(cp, rep.entry);
  write_file_atomic(checkpoint_path(in).string(), serialize_checkpoint(next));
  return {std::move(next), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Summary

struct RuleDetection {
  std::optional<std::int64_t> first_round;
  std::set<std::string> verdicts;  // verdicts of discrepancies attributed to this rule alone
  std::uint64_t rounds = 0;        // rounds with such a discrepancy
};

struct ArmSummary {
  std::string prompt_id;
  std::uint64_t pulls = 0;
  double mean_reward = 0;
  double cumulative_reward = 0;
};

struct CampaignSummary {
  std::int64_t attempted_rounds = 0;
  std::int64_t completed_rounds = 0;
  std::int64_t failed_rounds = 0;
  std::int64_t parse_failures = 0;
  std::uint64_t total_discrepancies = 0;
  std::uint64_t bug_discrepancies = 0;
  std::uint64_t unsafe_discrepancies = 0;
  std::map<std::string, RuleDetection> rules;  // keyed "R1".."R8"
  std::vector<ArmSummary> arms;
  // Table-1 shape: distinct rules with a Bug finding attributed to that rule
  // alone, distinct forward-only navigation ops behind UnsafeImplementation
  // findings.
  std::set<std::string> bug_rules;
  std::set<std::string> unsafe_triggers;

  std::uint64_t total_pulls() const {
    std::uint64_t n = 0;
    for (const auto& a : arms) n += a.pulls;
    return n;
  }
};

inline CampaignSummary summarize(const CampaignCheckpoint& cp) {
  CampaignSummary s;
  s.attempted_rounds = cp.attempted_rounds;
  s.completed_rounds = cp.completed_rounds;
  for (auto r : kAllRules) s.rules[to_string(r)] = {};
  for (const auto& e : cp.log) {
    if (e.status == RoundStatus::Failed) ++s.failed_rounds;
    if (e.status == RoundStatus::ParseFailure) ++s.parse_failures;
    s.total_discrepancies += e.discrepancies;
    s.bug_discrepancies += e.bugs;
    s.unsafe_discrepancies += e.unsafe;
    std::set<std::string> seen_this_round;
    for (const auto& a : e.attributions) {
      const auto colon = a.rfind(':');
      const auto rules = split(a.substr(0, colon), '+');
      const auto verdict = a.substr(colon + 1);
      if (rules.size() != 1 || !s.rules.count(rules.front())) continue;
      if (verdict == "Bug") s.bug_rules.insert(rules.front());
      auto& det = s.rules[rules.front()];
      if (!det.first_round) det.first_round = e.round;
      det.verdicts.insert(verdict);
      if (seen_this_round.insert(rules.front()).second) ++det.rounds;
    }
    s.unsafe_triggers.insert(e.unsafe_kinds.begin(), e.unsafe_kinds.end());
  }
  for (const auto& a : cp.bandit.arms) s.arms.push_back({a.prompt_id, a.pulls, a.mean_reward(), a.cumulative_reward()});
  return s;
}

inline std::string render_summary(const CampaignSummary& s) {
  std::ostringstream o;
  o << "rounds: attempted " << s.attempted_rounds << ", completed " << s.completed_rounds << ", failed "
    << s.failed_rounds << ", parse failures " << s.parse_failures << "\n";
  o << "discrepancies: " << s.total_discrepancies << " (Bug " << s.bug_discrepancies << ", UnsafeImplementation "
    << s.unsafe_discrepancies << ")\n\n";
  o << "Number of Bugs and Unsafe Implementations\n";
  o << "  Bugs                    " << s.bug_rules.size() << "  [" << join({s.bug_rules.begin(), s.bug_rules.end()}, ",")
    << "]\n";
  o << "  Unsafe Implementations  " << s.unsafe_triggers.size() << "  ["
    << join({s.unsafe_triggers.begin(), s.unsafe_triggers.end()}, ",") << "]\n";
  o << "  Total                   " << s.bug_rules.size() + s.unsafe_triggers.size() << "\n\n";
  o << "rule  first-round  rounds  verdicts\n";
  for (const auto& [rule, d] : s.rules) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-5s %-12s %-7llu %s\n", rule.c_str(),
                  d.first_round ? std::to_string(*d.first_round).c_str() : "-",
                  static_cast<unsigned long long>(d.rounds), join({d.verdicts.begin(), d.verdicts.end()}, ",").c_str());
    o << buf;
  }
  o << "\narm   pulls  mean-reward  cumulative-reward\n";
  for (const auto& a : s.arms) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-5s %-6llu %-12.4f %.4f\n", a.prompt_id.c_str(),
                  static_cast<unsigned long long>(a.pulls), a.mean_reward, a.cumulative_reward);
    o << buf;
  }
  return o.str();
}

/// Discrepancies over rounds, for plotting.
inline std::string render_csv(const CampaignCheckpoint& cp) {
  std::string out = "round,prompt_id,status,reward,discrepancies,bugs,unsafe,cumulative_discrepancies\n";
  std::uint64_t cum = 0;
  for (const auto& e : cp.log) {
    cum += e.discrepancies;
    out += std::to_string(e.round) + "," + e.prompt_id + "," + to_string(e.status) + "," + std::to_string(e.raw_reward) +
           "," + std::to_string(e.discrepancies) + "," + std::to_string(e.bugs) + "," + std::to_string(e.unsafe) + "," +
           std::to_string(cum) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaign

struct RunOptions {
  bool resume = false;
  /// Called after each committed round (progress reporting, fault injection).
  std::function<void(const CampaignCheckpoint&, const RoundReport&)> on_round;
};

inline CampaignCheckpoint load_checkpoint(const CampaignInputs& in) {
  const auto path = checkpoint_path(in);
  CampaignCheckpoint cp;
  try {
    cp = parse_checkpoint(read_file(path.string()));
  } catch (const ParseError& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
  if (cp.config_hash != in.config_hash)
    throw Error("checkpoint was written for a different configuration (hash " + cp.config_hash + ", expected " +
                in.config_hash + ")");
  return cp;
}

inline CampaignCheckpoint run_campaign(const CampaignInputs& in, const GeneratorFactory& factory = make_stub_generator,
                                       const RunOptions& options = {}) {
  const auto path = checkpoint_path(in);
  CampaignCheckpoint cp;
  if (fs::exists(path)) {
    if (!options.resume) throw Error("checkpoint exists at " + path.string() + "; pass --resume to continue it");
    cp = load_checkpoint(in);
  } else {
    cp = fresh_checkpoint(in);
  }
  auto generator = factory(in);
  while (cp.attempted_rounds < in.config.rounds) {
    auto [next, rep] = run_round(in, cp, *generator);
    cp = std::move(next);
    if (options.on_round) options.on_round(cp, rep);
  }
  return cp;
}

}  // namespace conndiff
