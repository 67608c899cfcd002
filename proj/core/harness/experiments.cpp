#include "treg/harness/experiments.hpp"

#include "treg/errors.hpp"
#include "treg/harness/io.hpp"
#include "treg/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace treg::harness {

namespace {

using nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ordered_json real(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

std::string two_digits(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", r);
  return buf;
}

struct Condition {
  std::string name;
  std::optional<std::string> concept_label;
};

double reference_peak(const Vector& ref) {
  const double range = ref.maxCoeff() - ref.minCoeff();
  return range > 0.0 ? range : 1.0;
}

// Runs every (condition, restart) pair; the result vector is ordered by
// condition, then restart, whatever the thread interleaving.
std::vector<RestartSummary> run_restarts(const Problem& problem, const std::vector<Condition>& conditions,
                                         const ExperimentOptions& opts) {
  const int n = static_cast<int>(conditions.size()) * opts.restarts;
  std::vector<RestartSummary> out(n);
  const SamplerInputs inputs = problem.inputs();
  parallel_for(n, opts.threads, [&](int i) {
    const Condition& cond = conditions[i / opts.restarts];
    RestartSummary& s = out[i];
    s.condition = cond.name;
    s.restart = i % opts.restarts;
    s.seed = restart_seed(problem.config.seed, s.restart);
    SolverConfig cfg = problem.solver;
    cfg.seed = s.seed;
    try {
      s.result = run(cfg, inputs, cond.concept_label);
      s.ok = true;
      s.y_mse = y_mse(problem.op, s.result.x_final, problem.measurement.y);
      s.psnr = problem.x_true ? psnr(s.result.x_final, *problem.x_true, reference_peak(*problem.x_true)) : kNaN;
    } catch (const DivergenceError& e) {
      s.ok = false;
      s.error = e.what();
      s.y_mse = s.psnr = kNaN;
    }
  });
  return out;
}

std::vector<ConditionSummary> summarise(const Problem& problem, const std::vector<Condition>& conditions,
                                        const std::vector<RestartSummary>& restarts) {
  const int row = problem.config.profile_row >= 0 ? problem.config.profile_row : problem.config.image.height / 2;
  std::vector<ConditionSummary> out;
  for (const auto& cond : conditions) {
    ConditionSummary cs;
    cs.name = cond.name;
    cs.concept_label = cond.concept_label.value_or("NULL");
    std::vector<Vector> finals;
    double mse = 0.0;
    for (const auto& r : restarts) {
      if (r.condition != cond.name) continue;
      ++cs.runs;
      if (!r.ok) {
        ++cs.failures;
        continue;
      }
      finals.push_back(r.result.x_final);
      mse += r.y_mse;
      if (!r.assigned.empty()) ++cs.assignment_counts[r.assigned];
    }
    cs.mean_y_mse = finals.empty() ? kNaN : mse / static_cast<double>(finals.size());
    if (finals.size() >= 2) cs.variance = pixel_variance(finals, problem.config.image, row);
    out.push_back(std::move(cs));
  }
  return out;
}

double fraction(const ConditionSummary& cs, const std::string& label) {
  const auto it = cs.assignment_counts.find(label);
  return cs.runs == 0 || it == cs.assignment_counts.end() ? 0.0 : static_cast<double>(it->second) / cs.runs;
}

ordered_json config_json(const Problem& problem) {
  std::istringstream in(render(problem.config));
  ordered_json out = ordered_json::object();
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    // the output location does not change what is computed
    if (eq != std::string::npos && line.substr(0, eq) != "output_dir") out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

void write_outputs(const Problem& problem, ExperimentReport& report, const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  const ImageShape shape = problem.config.image;
  auto add = [&](const std::string& name) {
    report.manifest.push_back(name);
    return dir / name;
  };

  write_raw(add("measurement.f64"),
            RawVector{problem.measurement.y, problem.measurement.sigma0, problem.measurement.seed});
  if (problem.x_true) {
    write_pgm(add("truth.pgm"), GrayImage{shape, *problem.x_true});
    write_raw(add("raw_truth.f64"), RawVector{*problem.x_true, problem.measurement.sigma0, problem.config.seed});
  }
  for (const auto& r : report.restarts) {
    if (!r.ok) continue;
    const std::string tag = report.kind == "solve" ? "solve" : r.condition + "_" + two_digits(r.restart);
    write_pgm(add("recon_" + tag + ".pgm"), GrayImage{shape, r.result.x_final});
    write_raw(add("raw_" + tag + ".f64"), RawVector{r.result.x_final, problem.measurement.sigma0, r.seed});
    write_trace_csv(add("trace_" + tag + ".csv"), r.result.trace);
  }
  for (const auto& c : report.conditions) {
    if (!c.variance) continue;
    write_pgm(add("variance_" + c.name + ".pgm"), GrayImage{shape, c.variance->variance});
    write_raw(add("raw_variance_" + c.name + ".f64"), RawVector{c.variance->variance, 0.0, problem.config.seed});
  }
  if (!report.convergence.empty()) {
    std::ostringstream csv;
    csv << "t,branch,dc_mean,dc_std,dsm_mean,dsm_std,samples\n";
    for (const auto& row : report.convergence)
      csv << row.t << ',' << row.branch << ',' << format_real(row.dc_mean) << ',' << format_real(row.dc_std) << ','
          << format_real(row.dsm_mean) << ',' << format_real(row.dsm_std) << ',' << row.samples << '\n';
    write_text(add("convergence.csv"), csv.str());
  }

  ordered_json j;
  j["kind"] = report.kind;
  j["seed"] = problem.config.seed;
  j["operator"] = problem.op.id();
  j["config"] = config_json(problem);
  ordered_json restarts = ordered_json::array();
  for (const auto& r : report.restarts) {
    ordered_json e;
    e["condition"] = r.condition;
    e["restart"] = r.restart;
    e["seed"] = r.seed;
    e["ok"] = r.ok;
    if (!r.ok) e["error"] = r.error;
    if (!r.assigned.empty()) e["assigned"] = r.assigned;
    e["y_mse"] = real(r.y_mse);
    e["psnr"] = real(r.psnr);
    if (r.ok && !r.result.trace.steps.empty())
      e["final_data_consistency"] = real(r.result.trace.steps.back().data_consistency);
    restarts.push_back(std::move(e));
  }
  j["restarts"] = std::move(restarts);
  ordered_json conds = ordered_json::array();
  for (const auto& c : report.conditions) {
    ordered_json e;
    e["name"] = c.name;
    e["concept"] = c.concept_label;
    e["runs"] = c.runs;
    e["failures"] = c.failures;
    e["assignment_counts"] = c.assignment_counts;
    e["mean_y_mse"] = real(c.mean_y_mse);
    if (c.variance) {
      e["mean_pixel_variance"] = real(c.variance->mean);
      ordered_json prof = ordered_json::array();
      for (double v : c.variance->profile) prof.push_back(real(v));
      e["variance_profile"] = std::move(prof);
    }
    conds.push_back(std::move(e));
  }
  j["conditions"] = std::move(conds);
  ordered_json stats = ordered_json::object();
  for (const auto& [k, v] : report.statistics) stats[k] = real(v);
  j["statistics"] = std::move(stats);
  j["manifest"] = report.manifest;
  write_text(dir / "report.json", j.dump(2) + "\n");
  report.manifest.push_back("report.json");
}

std::string require_concept(const Problem& problem, const char* what) {
  const auto& c = problem.config;
  if (!c.experiment_concept.empty()) return c.experiment_concept;
  if (c.concept_label) return *c.concept_label;
  if (problem.truth_concept) return *problem.truth_concept;
  throw ConfigError(std::string(what) + " needs experiment.concept (or solver.concept / truth.concept)");
}

}  // namespace

int thread_budget() {
  const char* env = std::getenv("TREG_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 256));
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::uint64_t restart_seed(std::uint64_t base, int r) { return derive_seed(base, static_cast<std::uint64_t>(r)); }

ExperimentReport run_solve(const Problem& problem, const ExperimentOptions& opts) {
  ExperimentReport report;
  report.kind = "solve";
  RestartSummary s;
  s.condition = "solve";
  s.seed = problem.config.seed;
  SolverConfig cfg = problem.solver;
  cfg.seed = s.seed;
  s.result = run(cfg, problem.inputs(), problem.config.concept_label);
  s.ok = true;
  s.y_mse = y_mse(problem.op, s.result.x_final, problem.measurement.y);
  s.psnr = problem.x_true ? psnr(s.result.x_final, *problem.x_true, reference_peak(*problem.x_true)) : kNaN;
  report.statistics["y_mse"] = s.y_mse;
  report.statistics["psnr"] = s.psnr;
  report.restarts.push_back(std::move(s));
  write_outputs(problem, report, opts.out_dir);
  return report;
}

ExperimentReport experiment_ambiguity(const Problem& problem, const ExperimentOptions& opts) {
  const std::string target = require_concept(problem, "experiment ambiguity");
  const std::vector<Condition> conds = {{"conditioned", target}, {"unconditioned", std::nullopt}};
  ExperimentReport report;
  report.kind = "ambiguity";
  report.restarts = run_restarts(problem, conds, opts);
  for (auto& r : report.restarts)
    if (r.ok)
      r.assigned = problem.prior.concept_at(nearest_concept(problem.prior, problem.codec.encode_mean(r.result.x_final))).label;
  report.conditions = summarise(problem, conds, report.restarts);
  const auto& cond = report.conditions[0];
  const auto& uncond = report.conditions[1];
  report.statistics["conditioned_hit_fraction"] = fraction(cond, target);
  for (const auto& c : problem.prior.concepts())
    report.statistics["unconditioned_fraction_" + c.label] = fraction(uncond, c.label);
  report.statistics["conditioned_mean_variance"] = cond.variance ? cond.variance->mean : kNaN;
  report.statistics["unconditioned_mean_variance"] = uncond.variance ? uncond.variance->mean : kNaN;
  write_outputs(problem, report, opts.out_dir);
  return report;
}

ExperimentReport experiment_symmetry(const Problem& problem, const ExperimentOptions& opts) {
  if (problem.op.kind() != OperatorKind::PhaseRetrieval)
    throw ConfigError("experiment symmetry needs operator.kind = phase");
  if (!problem.x_true) throw ConfigError("experiment symmetry needs truth.concept");
  const Vector& target_img = *problem.x_true;
  const Vector flipped = flip180(target_img);
  const Vector a = problem.op.apply(target_img);
  const Vector b = problem.op.apply(flipped);
  const double sym = (a - b).norm() / std::max(a.norm(), std::numeric_limits<double>::min());
  if (sym > 1e-12) throw ContractViolation("operator is not flip-symmetric on the target image");

  const std::string target = require_concept(problem, "experiment symmetry");
  const std::vector<Condition> conds = {{"conditioned", target}, {"unconditioned", std::nullopt}};
  ExperimentReport report;
  report.kind = "symmetry";
  report.restarts = run_restarts(problem, conds, opts);
  for (auto& r : report.restarts)
    if (r.ok)
      r.assigned = (r.result.x_final - target_img).squaredNorm() <= (r.result.x_final - flipped).squaredNorm()
                       ? "target"
                       : "flip";
  report.conditions = summarise(problem, conds, report.restarts);
  report.statistics["symmetry_residual"] = sym;
  report.statistics["conditioned_flip_fraction"] = fraction(report.conditions[0], "flip");
  report.statistics["conditioned_target_fraction"] = fraction(report.conditions[0], "target");
  report.statistics["unconditioned_flip_fraction"] = fraction(report.conditions[1], "flip");
  report.statistics["unconditioned_target_fraction"] = fraction(report.conditions[1], "target");
  report.statistics["conditioned_mean_y_mse"] = report.conditions[0].mean_y_mse;
  report.statistics["unconditioned_mean_y_mse"] = report.conditions[1].mean_y_mse;
  write_outputs(problem, report, opts.out_dir);
  return report;
}

ExperimentReport experiment_convergence(const Problem& problem, const ExperimentOptions& opts) {
  const std::string target = require_concept(problem, "experiment convergence");
  const std::vector<Condition> conds = {{"conditioned", target}};
  ExperimentReport report;
  report.kind = "convergence";
  report.restarts = run_restarts(problem, conds, opts);
  report.conditions = summarise(problem, conds, report.restarts);

  std::vector<const RunTrace*> traces;
  for (const auto& r : report.restarts)
    if (r.ok) traces.push_back(&r.result.trace);
  if (!traces.empty()) {
    const std::size_t steps = traces.front()->steps.size();
    for (std::size_t i = 0; i < steps; ++i) {
      ConvergenceRow row;
      row.t = traces.front()->steps[i].t;
      row.branch = to_string(traces.front()->steps[i].branch);
      row.samples = static_cast<int>(traces.size());
      for (const auto* tr : traces) {
        row.dc_mean += tr->steps[i].data_consistency;
        row.dsm_mean += tr->steps[i].dsm_loss;
      }
      row.dc_mean /= row.samples;
      row.dsm_mean /= row.samples;
      if (row.samples > 1) {
        for (const auto* tr : traces) {
          row.dc_std += std::pow(tr->steps[i].data_consistency - row.dc_mean, 2);
          row.dsm_std += std::pow(tr->steps[i].dsm_loss - row.dsm_mean, 2);
        }
        row.dc_std = std::sqrt(row.dc_std / (row.samples - 1));
        row.dsm_std = std::sqrt(row.dsm_std / (row.samples - 1));
      }
      report.convergence.push_back(row);
    }
    const ConvergenceRow* first_gamma = nullptr;
    const ConvergenceRow* last_gamma = nullptr;
    for (const auto& row : report.convergence)
      if (row.branch == "gamma") {
        if (!first_gamma) first_gamma = &row;
        last_gamma = &row;
      }
    if (first_gamma) {
      report.statistics["dc_first_gamma_t"] = first_gamma->t;
      report.statistics["dc_first_gamma_mean"] = first_gamma->dc_mean;
      report.statistics["dc_last_gamma_t"] = last_gamma->t;
      report.statistics["dc_last_gamma_mean"] = last_gamma->dc_mean;
    }
    auto nearest = [&](int t) {
      const ConvergenceRow* best = &report.convergence.front();
      for (const auto& row : report.convergence)
        if (std::abs(row.t - t) < std::abs(best->t - t)) best = &row;
      return best;
    };
    for (int t : {100, 800}) {
      const ConvergenceRow* row = nearest(t);
      report.statistics["dsm_t" + std::to_string(t) + "_visited"] = row->t;
      report.statistics["dsm_t" + std::to_string(t) + "_mean"] = row->dsm_mean;
    }
  }
  write_outputs(problem, report, opts.out_dir);
  return report;
}

}  // namespace treg::harness
