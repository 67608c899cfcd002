#pragma once

#include "treg/harness/metrics.hpp"
#include "treg/harness/problem.hpp"
#include "treg/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace treg::harness {

struct ExperimentOptions {
  int restarts = 10;
  int threads = 1;
  std::filesystem::path out_dir;  // empty: nothing is written
};

struct RestartSummary {
  std::string condition;
  int restart = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string assigned;  // mode / class label
  double y_mse = 0.0;
  double psnr = 0.0;  // nan without a ground truth
  RunResult result;
};

struct ConditionSummary {
  std::string name;
  std::string concept_label;  // "NULL" for unconditioned runs
  int runs = 0;
  int failures = 0;
  std::map<std::string, int> assignment_counts;
  std::optional<VarianceMap> variance;  // needs two successful runs
  double mean_y_mse = 0.0;
};

struct ConvergenceRow {
  int t = 0;
  std::string branch;
  double dc_mean = 0.0;
  double dc_std = 0.0;
  double dsm_mean = 0.0;
  double dsm_std = 0.0;
  int samples = 0;
};

struct ExperimentReport {
  std::string kind;
  std::vector<RestartSummary> restarts;
  std::vector<ConditionSummary> conditions;
  std::map<std::string, double> statistics;
  std::vector<ConvergenceRow> convergence;
  std::vector<std::string> manifest;  // paths relative to the output directory
};

ExperimentReport run_solve(const Problem& problem, const ExperimentOptions& opts);
ExperimentReport experiment_ambiguity(const Problem& problem, const ExperimentOptions& opts);
ExperimentReport experiment_symmetry(const Problem& problem, const ExperimentOptions& opts);
ExperimentReport experiment_convergence(const Problem& problem, const ExperimentOptions& opts);

// TREG_THREADS, clamped to >= 1; 1 when unset or malformed.
int thread_budget();

// Calls fn(i) for i in [0, count) on up to `threads` workers. Exceptions are
// rethrown on the calling thread after all workers have joined.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

// Seed of restart r, shared by all conditions of an experiment.
std::uint64_t restart_seed(std::uint64_t base, int r);

}  // namespace treg::harness
