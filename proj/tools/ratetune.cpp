#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ratetune/config.hpp"
#include "ratetune/run.hpp"
#include "ratetune/schedule_io.hpp"
#include "ratetune/verify/checks.hpp"

namespace {

struct RunFlags {
  std::string config, schedule, out, theta, beta, overlap, plots;
  std::optional<std::uint64_t> seed;
  std::optional<int> update_period;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--schedule", f.schedule, "signature lifecycle schedule (CSV)");
  cmd->add_option("--out", f.out, "report directory");
  cmd->add_option("--theta", f.theta, "comma-separated FP/TP ratios");
  cmd->add_option("--beta", f.beta, "comma-separated FN weights");
  cmd->add_option("--overlap", f.overlap, "classifier overlap")->check(CLI::IsMember({"on", "off", "both"}));
  cmd->add_option("--seed", f.seed, "base random seed");
  cmd->add_option("--plots", f.plots, "write SVG plots")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--update-period", f.update_period, "days between rate updates")->check(CLI::PositiveNumber);
}

// Config file first, then command-line overrides.
ratetune::RunConfig resolve(const RunFlags& f) {
  ratetune::RunConfig cfg;
  if (!f.config.empty()) ratetune::load_config(f.config, cfg);
  auto set = [&](const char* key, const std::string& v) {
    if (!v.empty()) ratetune::apply_setting(cfg, key, v);
  };
  set("schedule", f.schedule);
  set("out", f.out);
  set("theta", f.theta);
  set("beta", f.beta);
  set("overlap", f.overlap);
  set("plots", f.plots);
  if (f.seed) cfg.sim.seed = *f.seed;
  if (f.update_period) cfg.sim.update_period_days = *f.update_period;
  cfg.sim.validate();
  return cfg;
}

int run(const RunFlags& flags, bool single_cell) {
  const auto cfg = resolve(flags);
  if (single_cell && (cfg.thetas.size() != 1 || cfg.betas.size() != 1 || cfg.overlap == ratetune::OverlapMode::both))
    throw std::invalid_argument("simulate runs one cell; use sweep for several theta/beta/overlap values");
  const auto schedule = ratetune::load_schedule(cfg, std::cerr);
  const auto out = ratetune::run_and_report(cfg, schedule, std::cerr);
  for (const auto& s : out.summaries) {
    std::cout << "theta=" << ratetune::format_param(s.theta) << " beta=" << ratetune::format_param(s.beta)
              << " overlap=" << (s.overlap ? "on" : "off") << "  TP removed "
              << ratetune::format_real(s.tp_removed_pct, 2) << "%  FP removed "
              << ratetune::format_real(s.fp_removed_pct, 2) << "%  fallbacks " << s.fallback_count << '\n';
  }
  std::cout << "wrote " << out.files.size() << " files to " << cfg.out_dir.string() << '\n';
  return 0;
}

int selftest() {
  using namespace ratetune::verify;
  const CheckResult results[] = {
      check_formula_oracles(10, 30, 100000, 11),
      check_selection_optimality(100, 12, 12),
      check_all_true_evidence(),
      check_one_false_factor(),
      check_inference_accuracy(40, 10, 13),
      check_monotonicity(300, 14),
      check_no_overlap_shortcut(30, 200, 15),
  };
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-rate optimization and replay simulator for classifier ensembles", "ratetune"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);

  RunFlags sim_flags, sweep_flags;
  auto* simulate = app.add_subcommand("simulate", "run one simulation and write days.csv and summary.csv");
  add_run_flags(simulate, sim_flags);
  auto* sweep = app.add_subcommand("sweep", "run a theta x beta x overlap grid");
  add_run_flags(sweep, sweep_flags);

  std::size_t signatures = 200;
  int days = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-schedule", "write a random signature schedule");
  gen->add_option("--signatures", signatures, "number of signatures")->check(CLI::NonNegativeNumber);
  gen->add_option("--days", days, "schedule horizon in days")->check(CLI::Range(8, 1 << 20));
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", gen_out, "output file (default: stdout)");

  auto* self = app.add_subcommand("selftest", "run reduced oracle suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run(sim_flags, true);
    if (sweep->parsed()) return run(sweep_flags, false);
    if (gen->parsed()) {
      const auto schedule = ratetune::generate_schedule(signatures, days, gen_seed);
      if (gen_out.empty()) {
        ratetune::write_schedule(std::cout, schedule);
      } else {
        std::ofstream os(gen_out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write '" + gen_out + "'");
        ratetune::write_schedule(os, schedule);
      }
      return 0;
    }
    if (self->parsed()) return selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
