// Command-line front end: run, verify, count-ops, sweep.
//
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 simulation error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "beta/config.hpp"
#include "beta/errors.hpp"
#include "beta/report.hpp"
#include "beta/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kConfigError = 2;
constexpr int kSimulationError = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string format = "human";
  int trials = 100;
  std::vector<int> bits{1, 2, 4, 8};
  std::vector<long long> sizes;
  std::string fault;
};

beta::RunConfig load(const Options& o) {
  beta::RunConfig c = o.config_path.empty() ? beta::RunConfig{} : beta::load_run_config(o.config_path);
  if (o.config_path.empty()) c.validate();
  if (o.seed) c.seed = *o.seed;
  if (!o.fault.empty()) {
    if (o.fault != "lane_rule") throw beta::ConfigError("--inject-fault", "only 'lane_rule' is available");
    c.pipeline.engine.fault = beta::Fault::drop_last_lane;
  }
  return c;
}

void emit(const beta::RunConfig& config, const beta::Report& report, beta::ReportFormat format) {
  std::cout << beta::render(report, format);
  if (!config.output.empty()) {
    std::ofstream out(config.output);
    if (!out) throw beta::ConfigError("run.output", "cannot write '" + config.output + "'");
    out << beta::render(report, beta::ReportFormat::machine);
  }
}

int cmd_run(const Options& o) {
  const beta::RunConfig config = load(o);
  const auto format = beta::parse_report_format(o.format);
  if (config.blocks < 1) throw beta::ConfigError("model.blocks", "run needs at least one block");
  const beta::Model model = beta::build_model(config);
  const beta::ModelResult result = beta::run_model(model, beta::build_input(config), config.pipeline);
  emit(config, beta::run_report(config, result), format);
  return kOk;
}

int cmd_verify(const Options& o) {
  if (o.trials < 1) throw beta::ConfigError("--trials", "must be >= 1");
  const beta::RunConfig config = load(o);
  const beta::VerifySummary s = beta::run_verification(config.seed, o.trials, config.pipeline.engine);
  auto line = [](const char* name, const beta::SuiteCount& c) {
    std::cout << name << ": " << c.passed << " passed, " << c.failed << " failed\n";
  };
  std::cout << "seed: " << config.seed << "\n";
  line("abstraction vs exact product", s.qmm);
  line("engine vs plain dot product ", s.dot);
  line("pipeline vs reference model ", s.block);
  if (s.ok()) return kOk;
  std::cout << "first counterexample:\n" << s.first_counterexample;
  return kVerifyFailed;
}

int cmd_count_ops(const Options& o) {
  const auto format = beta::parse_report_format(o.format);
  std::vector<beta::CountRow> rows;
  for (long long n : o.sizes) {
    if (n < 1) throw beta::ConfigError("N", "must be >= 1");
    rows.push_back({n, beta::count_report(beta::count_reference_configuration(n), n)});
  }
  const beta::Report report = beta::count_ops_report(rows);
  std::cout << beta::render(report, format);
  for (const auto& r : rows) {
    if (!r.counts.iop_formula_match) return kVerifyFailed;
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  const beta::RunConfig config = load(o);
  const auto format = beta::parse_report_format(o.format);
  const auto points =
      beta::precision_sweep(config.spec, config.blocks, o.bits, config.pipeline, config.seed, config.energy);
  emit(config, beta::sweep_report(config, points), format);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary Transformer accelerator simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", o.config_path, "run configuration file");
    if (needs_config) opt->required();
    sub->add_option("--seed", o.seed, "override run.seed");
    sub->add_option("--format", o.format, "human or machine")->check(CLI::IsMember({"human", "machine"}));
  };

  auto* run = app.add_subcommand("run", "simulate a model and report throughput");
  common(run, true);

  auto* verify = app.add_subcommand("verify", "randomized oracle-equivalence suite");
  common(verify, false);
  verify->add_option("--trials", o.trials, "trials per suite");
  verify->add_option("--inject-fault", o.fault)->group("");

  auto* count = app.add_subcommand("count-ops", "measured vs formula operation counts");
  count->add_option("N", o.sizes, "matrix sizes");
  count->add_option("--format", o.format, "human or machine")->check(CLI::IsMember({"human", "machine"}));

  auto* sweep = app.add_subcommand("sweep", "throughput across activation precisions");
  common(sweep, true);
  sweep->add_option("--bits", o.bits, "activation widths")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(o);
    if (*verify) return cmd_verify(o);
    if (*count) return cmd_count_ops(o);
    return cmd_sweep(o);
  } catch (const beta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kSimulationError;
  }
}
