#include <gtest/gtest.h>

#include <regex>

#include "conndiff/campaign.hpp"
#include "support.hpp"

using namespace conndiff;
using namespace conndiff::testing;

namespace {

/// Shipped campaign with output redirected into `dir`.
CampaignInputs shipped_inputs(const fs::path& dir, std::int64_t rounds) {
  auto c = parse_campaign_config(read_file(data_path("campaign.cdc")), CONNDIFF_DATA_DIR);
  c.output_dir = (dir / "out").string();
  c.rounds = rounds;
  return load_inputs(c);
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
  return out;
}

/// Wraps the stub; throws TransportError on the listed call numbers (1-based).
class FlakyGenerator final : public Generator {
public:
  FlakyGenerator(const CampaignInputs& in, std::set<int> fail) : inner_(in.prompt_set.grammar), fail_(std::move(fail)) {}
  GeneratorOutput generate(const GeneratorRequest& r) override {
    if (fail_.count(++calls_)) throw TransportError("simulated outage");
    return inner_.generate(r);
  }

private:
  StubGenerator inner_;
  std::set<int> fail_;
  int calls_ = 0;
};

class ProseGenerator final : public Generator {
public:
  GeneratorOutput generate(const GeneratorRequest&) override { return funnel("I cannot produce a trace today."); }
};

void check_accounting(const CampaignCheckpoint& cp) {
  std::uint64_t pulls = 0;
  for (const auto& a : cp.bandit.arms) pulls += a.pulls;
  std::int64_t failed = 0;
  for (const auto& e : cp.log) failed += e.status == RoundStatus::Failed;
  EXPECT_EQ(pulls, cp.bandit.total_rounds);
  EXPECT_EQ(static_cast<std::int64_t>(pulls), cp.completed_rounds);
  EXPECT_EQ(cp.completed_rounds, cp.attempted_rounds - failed);
  EXPECT_EQ(static_cast<std::int64_t>(cp.log.size()), cp.attempted_rounds);
}

}  // namespace

TEST(CampaignConfig, ShippedParsesAndRoundTrips) {
  const auto c = parse_campaign_config(read_file(data_path("campaign.cdc")), CONNDIFF_DATA_DIR);
  EXPECT_EQ(c.rounds, 200);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.subset_strategy, SubsetStrategy::PairwiseInteractions);
  EXPECT_EQ(c.divergence, DivergenceCatalog::all());
  EXPECT_EQ(c.modes.size(), 2u);
  const auto text = serialize_campaign_config(c);
  EXPECT_EQ(serialize_campaign_config(parse_campaign_config(text)), text);
  EXPECT_EQ(c.resolve(c.prompt_set), fs::path(data_path("prompts.cdp")).lexically_normal());
}

TEST(CampaignConfig, RemoteExampleParses) {
  const auto c = parse_campaign_config(read_file(data_path("remote-example.cdc")));
  EXPECT_EQ(c.generator, "remote");
  EXPECT_FALSE(c.remote.endpoint.empty());
  EXPECT_EQ(serialize_campaign_config(parse_campaign_config(serialize_campaign_config(c))),
            serialize_campaign_config(c));
}

TEST(CampaignConfig, Errors) {
  const std::string head = "conndiff-campaign v1\n";
  const std::string inputs = "inputs prompt-set=p property-schema=s\n";
  EXPECT_THROW(parse_campaign_config(head + inputs), ParseError);                                  // no campaign
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n"), ParseError);            // no inputs
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=0 seed=1\n" + inputs), ParseError);   // rounds < 1
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1 colour=red\n" + inputs), ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "generator kind=magic\n"),
               ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "generator kind=remote\n"),
               ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "divergence R9=on\n"), ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "divergence R1=maybe\n"),
               ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "compare modes=sideways\n"),
               ParseError);
  EXPECT_THROW(parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "subsets strategy=all k=2\n"),
               ParseError);
  try {
    parse_campaign_config(head + "campaign rounds=1 seed=1\n" + inputs + "bogus x=1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
  }
}

TEST(CampaignConfig, MissingInputFilesReported) {
  auto c = parse_campaign_config(read_file(data_path("campaign.cdc")), "/nonexistent-dir");
  EXPECT_THROW(load_inputs(c), Error);
}

TEST(Campaign, RoundNamesAndSeeds) {
  EXPECT_EQ(round_name(1), "r0001");
  EXPECT_EQ(round_name(12345), "r12345");
  EXPECT_NE(round_seed(42, 1), round_seed(42, 2));
  EXPECT_EQ(round_seed(42, 3), splitmix64(42 ^ splitmix64(3)));
}

TEST(Campaign, SingleRoundPullsExactlyOneArm) {
  TempDir dir("one");
  const auto in = shipped_inputs(dir.path, 1);
  const auto cp = run_campaign(in);
  std::uint64_t pulls = 0;
  for (const auto& a : cp.bandit.arms) pulls += a.pulls;
  EXPECT_EQ(pulls, 1u);
  EXPECT_EQ(cp.bandit.arms.front().pulls, 1u);  // cold start picks the first arm
  EXPECT_TRUE(fs::exists(checkpoint_path(in)));
  EXPECT_TRUE(fs::exists(output_dir(in) / "rounds" / "r0001.jsonl"));
  EXPECT_TRUE(fs::exists(output_dir(in) / "traces" / "r0001.trace"));
}

TEST(Campaign, NoRulesMeansNoDiscrepancies) {
  TempDir dir("norules");
  auto in = shipped_inputs(dir.path, 40);
  in.config.divergence = {};
  const auto cp = run_campaign(in);
  for (const auto& e : cp.log) {
    EXPECT_EQ(e.status, RoundStatus::Ok);
    EXPECT_EQ(e.discrepancies, 0u);
    EXPECT_EQ(e.raw_reward, 0u);
  }
  check_accounting(cp);
}

TEST(Campaign, CheckpointRoundTripsAndDetectsInconsistency) {
  TempDir dir("cp");
  const auto in = shipped_inputs(dir.path, 25);
  const auto cp = run_campaign(in);
  const auto text = read_file(checkpoint_path(in).string());
  EXPECT_EQ(parse_checkpoint(text), cp);
  EXPECT_EQ(serialize_checkpoint(cp), text);

  const auto bad_completed = std::regex_replace(text, std::regex("completed=25"), "completed=24");
  EXPECT_THROW(parse_checkpoint(bad_completed), ParseError);
  const auto bad_attempted = std::regex_replace(text, std::regex("attempted=25"), "attempted=26");
  EXPECT_THROW(parse_checkpoint(bad_attempted), ParseError);
  EXPECT_THROW(parse_checkpoint("conndiff-checkpoint v1\n"), ParseError);
}

TEST(Campaign, ReproducibleArtifacts) {
  TempDir a("repro-a"), b("repro-b");
  auto ia = shipped_inputs(a.path, 30);
  auto ib = shipped_inputs(b.path, 30);
  run_campaign(ia);
  run_campaign(ib);
  auto sa = snapshot_dir(output_dir(ia));
  auto sb = snapshot_dir(output_dir(ib));
  // The checkpoint embeds the config hash, which covers the output path.
  sa.erase("checkpoint.cdc");
  sb.erase("checkpoint.cdc");
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.size(), 60u);
  EXPECT_EQ(parse_checkpoint(read_file(checkpoint_path(ia).string())).log,
            parse_checkpoint(read_file(checkpoint_path(ib).string())).log);
}

TEST(Campaign, ResumeMatchesUninterruptedRun) {
  TempDir straight("straight"), split_run("split");
  const auto full = run_campaign(shipped_inputs(straight.path, 30));

  run_campaign(shipped_inputs(split_run.path, 12));
  auto in = shipped_inputs(split_run.path, 30);
  EXPECT_THROW(run_campaign(in), Error);  // refuses to clobber without resume
  // Simulate a crash after round 13's artifacts were written but before its checkpoint.
  {
    auto cp = load_checkpoint(in);
    auto gen = make_stub_generator(in);
    auto rep = execute_round(in, cp, *gen, cp.attempted_rounds + 1);
    ASSERT_TRUE(rep.trace);
    write_file_atomic((output_dir(in) / rep.entry.trace_file).string(), serialize(*rep.trace));
    write_file_atomic((output_dir(in) / "rounds" / (round_name(13) + ".jsonl")).string(), "partial garbage");
    ASSERT_EQ(load_checkpoint(in).attempted_rounds, 12);
  }
  RunOptions opts;
  opts.resume = true;
  const auto resumed = run_campaign(in, make_stub_generator, opts);
  EXPECT_EQ(resumed.log, full.log);
  EXPECT_EQ(resumed.bandit, full.bandit);
  auto sa = snapshot_dir(output_dir(in));
  auto sb = snapshot_dir(straight.path / "out");
  sa.erase("checkpoint.cdc");
  sb.erase("checkpoint.cdc");
  EXPECT_EQ(sa, sb);
}

TEST(Campaign, TransportFailureLeavesBanditUnchanged) {
  TempDir dir("flaky");
  const auto in = shipped_inputs(dir.path, 10);
  std::vector<CampaignCheckpoint> states{fresh_checkpoint(in)};
  RunOptions opts;
  opts.on_round = [&](const CampaignCheckpoint& cp, const RoundReport&) { states.push_back(cp); };
  const auto cp = run_campaign(
      in, [](const CampaignInputs& i) { return std::make_unique<FlakyGenerator>(i, std::set<int>{2, 5, 6}); }, opts);
  ASSERT_EQ(states.size(), 11u);
  for (int round : {2, 5, 6}) {
    const auto& e = cp.log[round - 1];
    EXPECT_EQ(e.status, RoundStatus::Failed);
    EXPECT_EQ(e.note, "simulated outage");
    EXPECT_EQ(states[round].bandit, states[round - 1].bandit);
    EXPECT_EQ(states[round].completed_rounds, states[round - 1].completed_rounds);
    EXPECT_FALSE(fs::exists(output_dir(in) / "traces" / (round_name(round) + ".trace")));
  }
  EXPECT_EQ(cp.attempted_rounds, 10);
  EXPECT_EQ(cp.completed_rounds, 7);
  check_accounting(cp);
  EXPECT_EQ(summarize(cp).failed_rounds, 3);
  EXPECT_EQ(parse_checkpoint(read_file(checkpoint_path(in).string())), cp);
}

TEST(Campaign, ParseFailureEarnsZeroReward) {
  TempDir dir("prose");
  const auto in = shipped_inputs(dir.path, 8);
  const auto cp = run_campaign(in, [](const CampaignInputs&) { return std::make_unique<ProseGenerator>(); });
  for (const auto& e : cp.log) {
    EXPECT_EQ(e.status, RoundStatus::ParseFailure);
    EXPECT_EQ(e.raw_reward, 0u);
    EXPECT_TRUE(e.trace_file.empty());
  }
  EXPECT_EQ(cp.completed_rounds, 8);
  for (const auto& a : cp.bandit.arms) EXPECT_EQ(a.reward_units, 0u);
  check_accounting(cp);
  EXPECT_EQ(summarize(cp).parse_failures, 8);
}

TEST(Campaign, ConfigChangeInvalidatesCheckpoint) {
  TempDir dir("hash");
  run_campaign(shipped_inputs(dir.path, 3));
  auto in = shipped_inputs(dir.path, 5);
  in.config.seed = 43;
  in = load_inputs(in.config);
  RunOptions opts;
  opts.resume = true;
  try {
    run_campaign(in, make_stub_generator, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("different configuration"), std::string::npos);
  }
  // Growing the round count alone is fine.
  EXPECT_EQ(run_campaign(shipped_inputs(dir.path, 5), make_stub_generator, opts).attempted_rounds, 5);
}

TEST(Campaign, ForwardOnlyRunYieldsUnsafeFinding) {
  TempDir dir("r1");
  auto in = shipped_inputs(dir.path, 40);
  in.config.divergence = DivergenceCatalog{{Rule::R1}};
  in = load_inputs(in.config);
  const auto cp = run_campaign(in);
  const auto s = summarize(cp);
  EXPECT_GT(s.unsafe_discrepancies, 0u);
  EXPECT_EQ(s.bug_discrepancies, 0u);
  EXPECT_EQ(s.rules.at("R1").verdicts, std::set<std::string>{"UnsafeImplementation"});
  EXPECT_TRUE(s.bug_rules.empty());
  EXPECT_FALSE(s.unsafe_triggers.empty());
  bool jsonl_has_unsafe = false;
  for (const auto& [name, text] : snapshot_dir(output_dir(in) / "rounds"))
    jsonl_has_unsafe = jsonl_has_unsafe || text.find("\"verdict\":\"UnsafeImplementation\"") != std::string::npos;
  EXPECT_TRUE(jsonl_has_unsafe);
}

TEST(Campaign, ArtifactsAreWellFormed) {
  TempDir dir("art");
  const auto in = shipped_inputs(dir.path, 20);
  const auto cp = run_campaign(in);
  for (const auto& e : cp.log) {
    ASSERT_EQ(e.status, RoundStatus::Ok);
    const auto t = parse_trace(read_file((output_dir(in) / e.trace_file).string()));
    EXPECT_TRUE(is_valid(t));
    EXPECT_EQ(t.id, round_name(e.round));
    ASSERT_TRUE(t.provenance);
    EXPECT_EQ(t.provenance->prompt_id, e.prompt_id);
    const auto lines = split(read_file((output_dir(in) / "rounds" / (round_name(e.round) + ".jsonl")).string()), '\n');
    ASSERT_GE(lines.size(), 1u);
    const auto head = nlohmann::json::parse(lines[0]);
    EXPECT_EQ(head["round"], e.round);
    EXPECT_EQ(head["reward"], e.raw_reward);
    std::size_t records = 0;
    for (std::size_t i = 1; i < lines.size(); ++i)
      if (!lines[i].empty()) {
        ++records;
        EXPECT_EQ(nlohmann::json::parse(lines[i])["trace_id"], round_name(e.round));
      }
    EXPECT_EQ(records, e.discrepancies);
  }
}

TEST(Campaign, SummaryAndCsv) {
  TempDir dir("sum");
  const auto in = shipped_inputs(dir.path, 30);
  const auto cp = run_campaign(in);
  const auto s = summarize(cp);
  EXPECT_EQ(s.total_pulls(), 30u);
  EXPECT_EQ(s.arms.size(), in.prompts.size());
  const auto text = render_summary(s);
  EXPECT_NE(text.find("Number of Bugs and Unsafe Implementations"), std::string::npos);
  const auto csv = split(render_csv(cp), '\n');
  EXPECT_EQ(csv[0], "round,prompt_id,status,reward,discrepancies,bugs,unsafe,cumulative_discrepancies");
  EXPECT_EQ(csv.size(), 32u);  // header, 30 rows, trailing empty
  EXPECT_EQ(split(csv[30], ',').back(), std::to_string(s.total_discrepancies));
  check_accounting(cp);
}
