#pragma once

#include "treg/codec.hpp"
#include "treg/consistency.hpp"
#include "treg/negation.hpp"
#include "treg/operators.hpp"
#include "treg/prior.hpp"
#include "treg/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace treg {

// Noise mixed into the DDIM update on data-consistency steps.
enum class Stochasticity {
  Default,        // s_t = sqrt(abar_prev (1 - abar_prev))
  Deterministic,  // s_t = 0
  Custom,         // s_t = custom_noise[t]
};

// Update used on steps outside the data-consistency range.
enum class PlainStep { Deterministic, TotalNoise };

enum class DpsLoss {
  Squared,  // ||A(D(z0)) - y||^2
  Norm,     // ||A(D(z0)) - y||
};

enum class RhoRule { SqrtAlphaBarPrev };

enum class Branch { Gamma, Plain, Dps };

const char* to_string(Branch b);

struct SolverConfig {
  int nfe = 200;
  double omega1 = 7.5;  // CFG scale of the Tweedie pivot
  double omega2 = 0.0;  // CFG scale inside the DPS gradient
  // Gamma = {t : t % gamma_mod == 0 and t <= gamma_tmax}; gamma_tmax = 0 empties it.
  int gamma_mod = 3;
  int gamma_tmax = 850;
  CGParams cg;
  AdamParams adam;
  bool use_adam = false;
  Stochasticity stochasticity = Stochasticity::Default;
  std::vector<double> custom_noise;  // indexed by t, size T + 1
  PlainStep plain_step = PlainStep::Deterministic;
  bool dps_enabled = false;
  RhoRule rho_rule = RhoRule::SqrtAlphaBarPrev;
  double dps_scale = 1.0;  // rho_t = dps_scale * sqrt(abar_prev)
  DpsLoss dps_loss = DpsLoss::Squared;
  bool negation_enabled = true;
  std::uint64_t seed = 0;

  bool in_gamma(int t) const { return t % gamma_mod == 0 && t <= gamma_tmax; }
};

void validate(const SolverConfig& cfg, const NoiseSchedule& sched);

struct StepRecord {
  int t = 0;
  int t_prev = 0;
  Branch branch = Branch::Plain;
  double data_consistency = 0.0;  // ||y - A(D(z0|t))||^2
  double dsm_loss = 0.0;          // (1 - abar)/abar ||eps - eps_theta(z_t, c, t)||^2
  double null_similarity = 0.0;   // <T_img(x_hat), c_null>, 0 without negation
  double null_similarity_after = 0.0;  // same x_hat, after the null update
};

struct RunTrace {
  std::vector<StepRecord> steps;
};

struct RunResult {
  Vector x_final;
  Vector z_final;
  RunTrace trace;
};

// Everything a run reads but never mutates. Shareable across concurrent runs.
struct SamplerInputs {
  const NoiseSchedule& schedule;
  const ConceptPrior& prior;
  const LatentCodec& codec;
  const ForwardOperator& op;
  const Measurement& measurement;
  // Initial negation state, copied per run. nullptr runs without the module.
  const EmbeddingState* embedding = nullptr;
};

struct StepView {
  int t;
  int t_prev;
  Branch branch;
  const Vector& z_t;
  const Vector& z_next;
  const Vector& z0_pivot;
};
using StepObserver = std::function<void(const StepView&)>;

// abar_prev z0_y + (1 - abar_prev) z0_t
Vector ema_combine(const Vector& z0_y, const Vector& z0_t, double abar_prev);

// [sqrt(1 - abar_prev - s^2) eps_cfg + s eps_rand] / sqrt(1 - abar_prev).
// Requires s^2 <= 1 - abar_prev; at abar_prev == 1 (s == 0) returns eps_cfg.
Vector total_noise(const Vector& eps_cfg, const Vector& eps_rand, double abar_prev, double s_t);

// sqrt(abar_prev) z_hat + sqrt(1 - abar_prev) eps_tilde
Vector ddim_step(const Vector& z_hat, const Vector& eps_tilde, double abar_prev);

double default_stochasticity(double abar_prev);

// Null-mixture weights the sampler uses for the current embedding state.
std::vector<double> null_weights_for(const ConceptPrior& prior, const EmbeddingState* state);

// Measurement loss of the CFG(omega2) Tweedie estimate, as a function of z_t.
double dps_loss(const SamplerInputs& in, const Vector& z_t, int t, double omega2,
                const std::vector<double>& null_weights, std::optional<int> concept_index, DpsLoss loss);

// Exact gradient of dps_loss through Tweedie, decoder and operator. Falls back
// to central differences (with a warning on stderr) if the analytic value is
// not finite.
Vector dps_gradient(const SamplerInputs& in, const Vector& z_t, int t, double omega2,
                    const std::vector<double>& null_weights, std::optional<int> concept_index,
                    DpsLoss loss);

// z_prev - rho * dps_gradient(...)
Vector dps_step(const Vector& z_prev, const Vector& z_t, int t, const SamplerInputs& in, double rho,
                double omega2, const std::vector<double>& null_weights, std::optional<int> concept_index,
                DpsLoss loss);

// One reverse-sampling run. concept == nullopt drops text conditioning (the
// pivot uses the null prediction only). Deterministic given cfg.seed.
RunResult run(const SolverConfig& cfg, const SamplerInputs& in, const std::optional<std::string>& concept_label,
              const StepObserver& observer = {});

}  // namespace treg
