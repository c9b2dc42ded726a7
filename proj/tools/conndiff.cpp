// conndiff command-line entry point: run / reduce / report / validate-config.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "conndiff/campaign.hpp"
#include "conndiff/reduce.hpp"
#include "conndiff/remote.hpp"

namespace {

using namespace conndiff;

std::unique_ptr<Generator> make_generator(const CampaignInputs& in) {
  if (in.config.generator == "stub") return make_stub_generator(in);
  const auto& r = in.config.remote;
  return std::make_unique<RemoteGenerator>(
      RemoteGeneratorConfig{r.endpoint, r.model, r.api_key_env, r.timeout_seconds, r.max_retries, r.max_in_flight});
}

CampaignInputs load(const std::string& path, std::optional<std::int64_t> rounds, std::optional<std::uint64_t> seed) {
  auto in = load_campaign_file(path);
  if (rounds || seed) {
    auto c = in.config;
    if (rounds) c.rounds = *rounds;
    if (seed) c.seed = *seed;
    in = load_inputs(std::move(c));
  }
  return in;
}

int cmd_run(const std::string& config, std::optional<std::int64_t> rounds, std::optional<std::uint64_t> seed,
            bool resume, bool quiet) {
  const auto in = load(config, rounds, seed);
  RunOptions opts;
  opts.resume = resume;
  opts.on_round = [&](const CampaignCheckpoint&, const RoundReport& rep) {
    if (quiet) return;
    const auto& e = rep.entry;
    std::printf("%s %s %-13s reward=%llu discrepancies=%llu\n", round_name(e.round).c_str(), e.prompt_id.c_str(),
                to_string(e.status).c_str(), static_cast<unsigned long long>(e.raw_reward),
                static_cast<unsigned long long>(e.discrepancies));
  };
  const auto cp = run_campaign(in, make_generator, opts);
  std::cout << "\n" << render_summary(summarize(cp));
  std::cout << "\ncheckpoint: " << checkpoint_path(in).string() << "\n";
  return 0;
}

int cmd_reduce(const std::string& trace_path, const std::string& config, std::size_t budget) {
  const auto in = load_campaign_file(config);
  Trace trace;
  try {
    trace = parse_trace(read_file(trace_path));
  } catch (const ParseError& e) {
    throw Error(trace_path + ": " + e.what());
  }
  const DifferentialSetup setup{in.config.divergence, in.config.modes, in.config.message_sensitive};
  const auto oracle = make_discrepancy_oracle(setup, in.catalog.flattened());
  const auto res = reduce(trace, oracle, {budget});
  const auto out = trace_path + ".min";
  write_file_atomic(out, serialize(res.trace));
  std::printf("reduced %zu -> %zu ops with %zu oracle calls%s\nwrote %s\n", trace.ops.size(), res.trace.ops.size(),
              res.oracle_calls, res.budget_exhausted ? " (call budget exhausted; may not be 1-minimal)" : "",
              out.c_str());
  return 0;
}

int cmd_report(const std::string& config, const std::string& checkpoint, const std::string& csv) {
  CampaignCheckpoint cp;
  if (!checkpoint.empty()) {
    try {
      cp = parse_checkpoint(read_file(checkpoint));
    } catch (const ParseError& e) {
      throw Error(checkpoint + ": " + e.what());
    }
  } else {
    cp = load_checkpoint(load_campaign_file(config));
  }
  std::cout << render_summary(summarize(cp));
  if (!csv.empty()) {
    write_file_atomic(csv, render_csv(cp));
    std::cout << "\nwrote " << csv << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& config) {
  const auto in = load_campaign_file(config);
  std::cout << "ok: " << config << "\n"
            << "  rounds " << in.config.rounds << ", seed " << in.config.seed << ", generator " << in.config.generator
            << "\n"
            << "  prompts " << in.prompts.size() << ", property assignments " << in.catalog.size() << " ("
            << to_string(in.catalog.strategy) << ")\n"
            << "  divergence " << in.config.divergence.to_string() << ", modes " << modes_to_string(in.config.modes)
            << "\n"
            << "  config hash " << in.config_hash << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conndiff: differential testing of database connectors"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::int64_t> rounds;
  std::optional<std::uint64_t> seed;
  bool resume = false, quiet = false;
  auto* run = app.add_subcommand("run", "run (or resume) a campaign");
  run->add_option("--config", config, "campaign config file")->required()->check(CLI::ExistingFile);
  run->add_option("--rounds", rounds, "override the round count")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "override the campaign seed");
  run->add_flag("--resume", resume, "continue from the checkpoint in the output directory");
  run->add_flag("--quiet", quiet, "print only the final summary");

  std::string trace_path;
  std::size_t budget = 0;
  auto* red = app.add_subcommand("reduce", "minimize a discrepancy-exhibiting trace");
  red->add_option("trace", trace_path, "trace file")->required()->check(CLI::ExistingFile);
  red->add_option("--config", config, "campaign config (divergence rules, modes, properties)")
      ->required()
      ->check(CLI::ExistingFile);
  red->add_option("--budget", budget, "maximum oracle calls (default 4n^2+16)");

  std::string checkpoint, csv;
  auto* rep = app.add_subcommand("report", "summarize a campaign checkpoint");
  auto* rep_config = rep->add_option("--config", config, "campaign config file")->check(CLI::ExistingFile);
  rep->add_option("--checkpoint", checkpoint, "checkpoint file (instead of --config)")
      ->check(CLI::ExistingFile)
      ->excludes(rep_config);
  rep->add_option("--csv", csv, "write discrepancies-over-rounds CSV here");

  auto* val = app.add_subcommand("validate-config", "check a campaign config and its inputs");
  val->add_option("--config", config, "campaign config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, rounds, seed, resume, quiet);
    if (*red) return cmd_reduce(trace_path, config, budget);
    if (*rep) {
      if (config.empty() && checkpoint.empty()) throw Error("report needs --config or --checkpoint");
      return cmd_report(config, checkpoint, csv);
    }
    if (*val) return cmd_validate(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
