#include "treg/sampler.hpp"

#include "treg/errors.hpp"
#include "treg/rng.hpp"

#include <cmath>
#include <iostream>

namespace treg {

namespace {

constexpr double kDivergenceNorm = 1e6;
constexpr std::uint64_t kSamplingStream = 1;
constexpr std::uint64_t kMonitorStream = 2;

// E[z0 | z_t] under CFG: linear in the two eps predictions, hence in the two means.
Vector guided_mean(const Mixture& null_mix, const std::optional<Mixture>& cond_mix, const Vector& z_t,
                   double abar, double omega) {
  const Vector e_null = posterior_mean(null_mix, z_t, abar);
  if (!cond_mix) return e_null;
  const Vector e_cond = posterior_mean(*cond_mix, z_t, abar);
  return e_null + omega * (e_cond - e_null);
}

Vector guided_eps(const Mixture& null_mix, const std::optional<Mixture>& cond_mix, const Vector& z_t,
                  double abar, double omega) {
  const Vector e_null = eps_prediction(null_mix, z_t, abar);
  if (!cond_mix) return e_null;
  return eps_cfg(e_null, eps_prediction(*cond_mix, z_t, abar), omega);
}

std::optional<Mixture> concept_mixture(const ConceptPrior& prior, std::optional<int> k) {
  if (!k) return std::nullopt;
  return Mixture::of_concept(prior, *k);
}

double stochasticity_at(const SolverConfig& cfg, int t, double abar_prev) {
  switch (cfg.stochasticity) {
    case Stochasticity::Default:
      return default_stochasticity(abar_prev);
    case Stochasticity::Deterministic:
      return 0.0;
    case Stochasticity::Custom:
      return cfg.custom_noise.at(t);
  }
  return 0.0;
}

}  // namespace

const char* to_string(Branch b) {
  switch (b) {
    case Branch::Gamma:
      return "gamma";
    case Branch::Plain:
      return "plain";
    case Branch::Dps:
      return "dps";
  }
  return "?";
}

void validate(const SolverConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.nfe < 1 || cfg.nfe > sched.steps()) throw ConfigError("solver.nfe must lie in [1, schedule.T]");
  if (!(cfg.omega1 >= 0.0)) throw ConfigError("solver.omega1 must be >= 0");
  if (!(cfg.omega2 >= 0.0)) throw ConfigError("solver.omega2 must be >= 0");
  if (cfg.gamma_mod < 1) throw ConfigError("solver.gamma_mod must be >= 1");
  if (cfg.gamma_tmax < 0 || cfg.gamma_tmax > sched.steps())
    throw ConfigError("solver.gamma_tmax must lie in [0, schedule.T]");
  if (cfg.use_adam)
    validate(cfg.adam);
  else
    validate(cfg.cg);
  if (!(cfg.dps_scale > 0.0)) throw ConfigError("solver.dps_scale must be > 0");
  if (cfg.stochasticity == Stochasticity::Custom) {
    if (static_cast<int>(cfg.custom_noise.size()) != sched.steps() + 1)
      throw ConfigError("solver.stochasticity_values must have T + 1 entries");
    const auto steps = subsample_steps(sched, cfg.nfe);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const int t = steps[i];
      const double abar_prev = sched.alpha_bar(i + 1 < steps.size() ? steps[i + 1] : 0);
      const double s = cfg.custom_noise[t];
      if (!(s >= 0.0) || s * s > 1.0 - abar_prev)
        throw ConfigError("solver.stochasticity_values: s_t^2 exceeds 1 - abar_prev at t=" + std::to_string(t));
    }
  }
}

Vector ema_combine(const Vector& z0_y, const Vector& z0_t, double abar_prev) {
  if (z0_y.size() != z0_t.size()) throw ShapeError("ema_combine: dimension mismatch");
  if (!(abar_prev >= 0.0 && abar_prev <= 1.0)) throw RangeError("ema_combine: abar_prev must lie in [0, 1]");
  return abar_prev * z0_y + (1.0 - abar_prev) * z0_t;
}

double default_stochasticity(double abar_prev) { return std::sqrt(abar_prev * (1.0 - abar_prev)); }

Vector total_noise(const Vector& eps_cfg, const Vector& eps_rand, double abar_prev, double s_t) {
  if (eps_cfg.size() != eps_rand.size()) throw ShapeError("total_noise: dimension mismatch");
  const double budget = 1.0 - abar_prev;
  if (!(s_t >= 0.0) || s_t * s_t > budget * (1.0 + 1e-12))
    throw ContractViolation("total_noise: s_t^2 exceeds 1 - abar_prev");
  if (budget <= 0.0) return eps_cfg;
  const double keep = std::sqrt(std::max(0.0, budget - s_t * s_t));
  return (keep * eps_cfg + s_t * eps_rand) / std::sqrt(budget);
}

Vector ddim_step(const Vector& z_hat, const Vector& eps_tilde, double abar_prev) {
  if (z_hat.size() != eps_tilde.size()) throw ShapeError("ddim_step: dimension mismatch");
  return std::sqrt(abar_prev) * z_hat + std::sqrt(1.0 - abar_prev) * eps_tilde;
}

std::vector<double> null_weights_for(const ConceptPrior& prior, const EmbeddingState* state) {
  if (state && prior.null_mode() == NullMode::EmbeddingWeighted) return state->null_weights();
  return prior.uniform_weights();
}

double dps_loss(const SamplerInputs& in, const Vector& z_t, int t, double omega2,
                const std::vector<double>& null_weights, std::optional<int> concept_index, DpsLoss loss) {
  const double abar = in.schedule.alpha_bar(t);
  const Mixture null_mix = Mixture::of_null(in.prior, null_weights);
  const auto cond_mix = concept_mixture(in.prior, concept_index);
  const Vector z0 = tweedie(z_t, abar, guided_eps(null_mix, cond_mix, z_t, abar, omega2));
  const double sq = data_residual(in.op, in.codec.decode(z0), in.measurement.y);
  return loss == DpsLoss::Squared ? sq : std::sqrt(sq);
}

Vector dps_gradient(const SamplerInputs& in, const Vector& z_t, int t, double omega2,
                    const std::vector<double>& null_weights, std::optional<int> concept_index,
                    DpsLoss loss) {
  const double abar = in.schedule.alpha_bar(t);
  const Mixture null_mix = Mixture::of_null(in.prior, null_weights);
  const auto cond_mix = concept_mixture(in.prior, concept_index);
  const Vector x0 = in.codec.decode(guided_mean(null_mix, cond_mix, z_t, abar, omega2));

  Vector gx = in.op.residual_gradient(x0, in.measurement.y);
  if (loss == DpsLoss::Norm) {
    const double r = std::sqrt(data_residual(in.op, x0, in.measurement.y));
    gx = r > 0.0 ? Vector(gx / (2.0 * r)) : Vector(Vector::Zero(gx.size()));
  }
  // decoder is enc^T, so its vjp is enc
  const Vector gz0 = in.codec.encode_mean(gx);
  Vector grad = posterior_mean_vjp(null_mix, z_t, abar, gz0);
  if (cond_mix) grad = (1.0 - omega2) * grad + omega2 * posterior_mean_vjp(*cond_mix, z_t, abar, gz0);

  if (grad.allFinite()) return grad;

  std::clog << "treg: warning: analytic DPS gradient not finite at t=" << t
            << ", using central differences\n";
  const double h = 1e-5;
  Vector fd(z_t.size());
  Vector probe = z_t;
  for (Eigen::Index i = 0; i < z_t.size(); ++i) {
    probe[i] = z_t[i] + h;
    const double up = dps_loss(in, probe, t, omega2, null_weights, concept_index, loss);
    probe[i] = z_t[i] - h;
    const double down = dps_loss(in, probe, t, omega2, null_weights, concept_index, loss);
    probe[i] = z_t[i];
    fd[i] = (up - down) / (2.0 * h);
  }
  return fd;
}

Vector dps_step(const Vector& z_prev, const Vector& z_t, int t, const SamplerInputs& in, double rho,
                double omega2, const std::vector<double>& null_weights, std::optional<int> concept_index,
                DpsLoss loss) {
  return z_prev - rho * dps_gradient(in, z_t, t, omega2, null_weights, concept_index, loss);
}

RunResult run(const SolverConfig& cfg, const SamplerInputs& in, const std::optional<std::string>& concept_label,
              const StepObserver& observer) {
  const NoiseSchedule& sched = in.schedule;
  validate(cfg, sched);
  if (in.codec.latent() != in.prior.dim()) throw ConfigError("codec.d does not match the prior dimension");
  if (in.codec.pixels() != in.op.in_dim()) throw ConfigError("codec.m does not match the operator input size");
  if (in.measurement.y.size() != in.op.out_dim()) throw ConfigError("measurement size does not match the operator");
  if (!cfg.use_adam && !in.op.is_linear())
    throw UnsupportedOperator("nonlinear operator " + in.op.id() + " needs solver.use_adam");

  std::optional<int> concept_index;
  if (concept_label) concept_index = in.prior.index_of(*concept_label);

  std::optional<EmbeddingState> negation;
  if (in.embedding) negation.emplace(*in.embedding);

  const auto steps = subsample_steps(sched, cfg.nfe);
  const Vector& y = in.measurement.y;
  const int d = in.prior.dim();

  Rng sampling(cfg.seed, kSamplingStream);
  Rng monitor(cfg.seed, kMonitorStream);

  RunResult result;
  result.trace.steps.reserve(steps.size());
  Vector z = sampling.normal_vector(d);

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    const double abar = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t_prev);

    const auto weights = null_weights_for(in.prior, negation ? &*negation : nullptr);
    const Mixture null_mix = Mixture::of_null(in.prior, weights);
    const auto cond_mix = concept_mixture(in.prior, concept_index);

    const Vector eps_hat = guided_eps(null_mix, cond_mix, z, abar, cfg.omega1);
    const Vector z0_pivot = tweedie(z, abar, eps_hat);
    const Vector x0_pivot = in.codec.decode(z0_pivot);

    StepRecord rec;
    rec.t = t;
    rec.t_prev = t_prev;
    rec.data_consistency = data_residual(in.op, x0_pivot, y);

    Vector z_next;
    Vector clean;
    if (cfg.in_gamma(t)) {
      rec.branch = Branch::Gamma;
      const double s = stochasticity_at(cfg, t, abar_prev);
      const Vector eps_rand = s > 0.0 ? sampling.normal_vector(d) : Vector(Vector::Zero(d));
      const Vector eps_tilde = total_noise(eps_hat, eps_rand, abar_prev, s);

      const Vector x0_y = cfg.use_adam ? adam_solve(in.op, y, x0_pivot, cfg.adam, x0_pivot)
                                       : cg_solve(in.op, y, x0_pivot, cfg.cg, x0_pivot).x;
      const Vector z0_y = in.codec.encode_mean(x0_y);
      clean = ema_combine(z0_y, z0_pivot, abar_prev);
      z_next = ddim_step(clean, eps_tilde, abar_prev);

      if (negation) {
        rec.null_similarity = negation->similarity(x0_y);
        rec.null_similarity_after = rec.null_similarity;
        if (cfg.negation_enabled) {
          negation->negate_step(x0_y);
          rec.null_similarity_after = negation->similarity(x0_y);
        }
      }
    } else {
      rec.branch = Branch::Plain;
      const double s = cfg.plain_step == PlainStep::TotalNoise ? stochasticity_at(cfg, t, abar_prev) : 0.0;
      const Vector eps_rand = s > 0.0 ? sampling.normal_vector(d) : Vector(Vector::Zero(d));
      clean = z0_pivot;
      z_next = ddim_step(z0_pivot, total_noise(eps_hat, eps_rand, abar_prev, s), abar_prev);
      if (cfg.dps_enabled) {
        rec.branch = Branch::Dps;
        const double rho = cfg.dps_scale * std::sqrt(abar_prev);
        z_next = dps_step(z_next, z, t, in, rho, cfg.omega2, weights, concept_index, cfg.dps_loss);
      }
      if (negation) rec.null_similarity = rec.null_similarity_after = negation->similarity(x0_pivot);
    }

    // monitoring: re-noise the current clean estimate with a private stream
    {
      const Vector eps_m = monitor.normal_vector(d);
      const Vector z_noised = std::sqrt(abar) * clean + std::sqrt(1.0 - abar) * eps_m;
      const Vector eps_pred = cond_mix ? eps_prediction(*cond_mix, z_noised, abar)
                                       : eps_prediction(null_mix, z_noised, abar);
      rec.dsm_loss = (1.0 - abar) / abar * (eps_m - eps_pred).squaredNorm();
    }

    if (!z_next.allFinite() || z_next.norm() > kDivergenceNorm)
      throw DivergenceError(t, "sampler diverged at t=" + std::to_string(t));

    if (observer) observer(StepView{t, t_prev, rec.branch, z, z_next, z0_pivot});
    result.trace.steps.push_back(rec);
    z = std::move(z_next);
  }

  result.z_final = z;
  result.x_final = in.codec.decode(z);
  return result;
}

}  // namespace treg
