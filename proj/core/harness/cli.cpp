#include "treg/harness/cli.hpp"

#include "treg/errors.hpp"
#include "treg/harness/config.hpp"
#include "treg/harness/experiments.hpp"
#include "treg/harness/io.hpp"
#include "treg/harness/problem.hpp"
#include "treg/rng.hpp"
#include "treg/validation.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace treg::harness {

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> restarts;
};

RunConfig load(const Common& c) {
  RunConfig cfg = load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.restarts) {
    if (*c.restarts < 1) throw ConfigError("--restarts must be >= 1");
    cfg.restarts = *c.restarts;
  }
  return cfg;
}

void print_statistics(const ExperimentReport& report, const std::filesystem::path& out) {
  std::cout << report.kind << ": " << report.restarts.size() << " run(s), output in " << out.string() << '\n';
  for (const auto& [k, v] : report.statistics) std::cout << "  " << k << " = " << format_real(v) << '\n';
}

int do_solve(const Common& c) {
  const RunConfig cfg = load(c);
  const Problem problem = build_problem(cfg);
  ExperimentOptions opts{1, 1, cfg.output_dir};
  print_statistics(run_solve(problem, opts), opts.out_dir);
  return 0;
}

int do_experiment(const Common& c, const std::string& kind) {
  RunConfig cfg = load(c);
  if (kind != "ambiguity" && kind != "symmetry" && kind != "convergence")
    throw ConfigError("experiment kind must be ambiguity, symmetry or convergence, got '" + kind + "'");
  if (!cfg.experiment_kind.empty() && cfg.experiment_kind != kind)
    throw ConfigError("experiment.kind is '" + cfg.experiment_kind + "' but '" + kind + "' was requested");
  const Problem problem = build_problem(cfg);
  ExperimentOptions opts{cfg.restarts, thread_budget(), cfg.output_dir};
  ExperimentReport report = kind == "ambiguity"  ? experiment_ambiguity(problem, opts)
                            : kind == "symmetry" ? experiment_symmetry(problem, opts)
                                                 : experiment_convergence(problem, opts);
  print_statistics(report, opts.out_dir);
  return 0;
}

int do_validate(const Common& c) {
  bool ok = true;
  auto show = [&](const validation::CheckResult& r) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": worst " << format_real(r.worst) << " (tolerance "
              << format_real(r.tolerance) << ", " << r.cases << " cases)\n";
    ok = ok && r.passed;
  };
  for (const auto& r : validation::run_oracle_suites(c.seed.value_or(0))) show(r);
  if (!c.config.empty()) {
    const Problem problem = build_problem(load(c));
    if (problem.op.is_linear()) {
      Rng rng(problem.config.seed, 0xD07);
      validation::CheckResult r{"dot test on " + problem.op.id(), false, 0.0, 1e-10, 0};
      for (int i = 0; i < 100; ++i, ++r.cases) r.worst = std::max(r.worst, validation::dot_test(problem.op, rng));
      r.passed = r.worst <= r.tolerance;
      show(r);
    }
  }
  return ok ? 0 : 1;
}

int do_show_config(const Common& c) {
  if (c.config.empty()) {
    std::cout << render(RunConfig{});
    return 0;
  }
  std::cout << render(load(c));
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Text-regularised latent posterior sampling on Gaussian-mixture priors", "treg"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common solve_opts, exp_opts, val_opts, show_opts;
  std::string kind;

  auto* solve = app.add_subcommand("solve", "Run one reconstruction");
  solve->add_option("--config", solve_opts.config, "Run config file")->required();
  solve->add_option("--seed", solve_opts.seed, "Override the config seed");
  solve->add_option("--out", solve_opts.out, "Output directory");

  auto* exp = app.add_subcommand("experiment", "Run a restart experiment");
  exp->add_option("kind", kind, "ambiguity | symmetry | convergence")->required();
  exp->add_option("--config", exp_opts.config, "Run config file")->required();
  exp->add_option("--seed", exp_opts.seed, "Override the config seed");
  exp->add_option("--out", exp_opts.out, "Output directory");
  exp->add_option("--restarts", exp_opts.restarts, "Restarts per condition");

  auto* val = app.add_subcommand("validate", "Run the oracle suites");
  val->add_option("--config", val_opts.config, "Also check the problem this config describes");
  val->add_option("--seed", val_opts.seed, "Seed of the randomised suites");

  auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
  show->add_option("--config", show_opts.config, "Run config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (solve->parsed()) return do_solve(solve_opts);
    if (exp->parsed()) return do_experiment(exp_opts, kind);
    if (val->parsed()) return do_validate(val_opts);
    if (show->parsed()) return do_show_config(show_opts);
  } catch (const ConfigError& e) {
    std::cerr << "treg: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "treg: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "treg: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}

}  // namespace treg::harness
