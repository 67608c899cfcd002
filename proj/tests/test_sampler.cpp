#include "treg/errors.hpp"
#include "treg/rng.hpp"
#include "treg/sampler.hpp"
#include "treg/validation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace treg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

struct Fixture {
  NoiseSchedule schedule = make_schedule(1000, 0.00085, 0.012);
  ConceptPrior prior;
  LatentCodec codec;
  ForwardOperator op;
  Measurement measurement;
  std::optional<EmbeddingState> embedding;

  Fixture(ForwardOperator o, NullMode mode = NullMode::EmbeddingWeighted)
      : prior(4, {Concept{"a", {{0.5, vec({2, 0, 1, 0}), 0.2}, {0.5, vec({1, 1, 0, 0}), 0.3}}},
                  Concept{"b", {{1.0, vec({-2, 0, 0, 1}), 0.25}}}},
              mode),
        codec(LatentCodec::random(16, 4, 3)),
        op(std::move(o)),
        measurement(simulate_measurement(op, codec.decode(vec({2, 0, 1, 0})), 0.05, 4)) {}

  SamplerInputs inputs(bool with_embedding = false) const {
    return SamplerInputs{schedule, prior, codec, op, measurement, with_embedding && embedding ? &*embedding : nullptr};
  }
};

const ImageShape kShape{4, 4};

SolverConfig small_config() {
  SolverConfig cfg;
  cfg.nfe = 50;
  cfg.seed = 9;
  return cfg;
}

// Posterior mean of an isotropic mixture, written out directly.
Vector reference_mean(const std::vector<std::tuple<double, Vector, double>>& comps, const Vector& z, double abar) {
  std::vector<double> logw;
  for (const auto& [w, m, v] : comps) {
    const double s2 = abar * v + 1 - abar;
    logw.push_back(std::log(w) - 0.5 * z.size() * std::log(s2) - (z - std::sqrt(abar) * m).squaredNorm() / (2 * s2));
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0;
  Vector acc = Vector::Zero(z.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& [w, m, v] = comps[i];
    const double r = std::exp(logw[i] - top);
    const double s2 = abar * v + 1 - abar;
    acc += r * (m + std::sqrt(abar) * v / s2 * (z - std::sqrt(abar) * m));
    total += r;
  }
  return acc / total;
}

}  // namespace

TEST(Sampler, EmaExamples) {
  const Vector a = vec({1, 0});
  const Vector b = vec({0, 1});
  EXPECT_EQ(ema_combine(a, b, 1.0), a);
  EXPECT_EQ(ema_combine(a, b, 0.0), b);
  const Vector c = ema_combine(a, b, 0.3);
  EXPECT_NEAR(c[0], 0.3, 1e-16);
  EXPECT_NEAR(c[1], 0.7, 1e-16);
  EXPECT_THROW(ema_combine(a, b, 1.1), RangeError);
}

TEST(Sampler, TotalNoiseExamples) {
  const Vector e = vec({1, -2});
  const Vector r = vec({0.5, 3});
  EXPECT_EQ(total_noise(e, r, 0.4, 0.0), e);
  const double s = default_stochasticity(0.36);
  EXPECT_NEAR(s, 0.48, 1e-16);
  const Vector t = total_noise(e, r, 0.36, s);
  EXPECT_LE((t - (0.8 * e + 0.6 * r)).norm(), 1e-15);
  EXPECT_EQ(total_noise(e, r, 1.0, 0.0), e);
  EXPECT_THROW(total_noise(e, r, 0.36, 0.81), ContractViolation);
}

TEST(Sampler, TotalNoiseUnitSecondMoment) {
  Rng rng(1);
  for (double abar_prev : {0.01, 0.2, 0.5, 0.9, 0.999}) {
    const double s = default_stochasticity(abar_prev);
    const double keep = total_noise(vec({1}), vec({0}), abar_prev, s)[0];
    const double mix = total_noise(vec({0}), vec({1}), abar_prev, s)[0];
    EXPECT_NEAR(keep * keep + mix * mix, 1.0, 1e-14);
    const int n = 200000;
    const Vector out = total_noise(rng.normal_vector(n), rng.normal_vector(n), abar_prev, s);
    EXPECT_NEAR(out.squaredNorm() / n, 1.0, 0.02);
  }
}

TEST(Sampler, DdimExamples) {
  const Vector z = vec({1, 2});
  const Vector e = vec({-1, 0.5});
  EXPECT_EQ(ddim_step(z, e, 1.0), z);
  EXPECT_EQ(ddim_step(z, e, 0.0), e);
}

TEST(Sampler, DefaultsAndGamma) {
  const SolverConfig cfg;
  EXPECT_EQ(cfg.nfe, 200);
  EXPECT_EQ(cfg.gamma_mod, 3);
  EXPECT_EQ(cfg.gamma_tmax, 850);
  EXPECT_TRUE(cfg.in_gamma(849));
  EXPECT_FALSE(cfg.in_gamma(852));
  EXPECT_FALSE(cfg.in_gamma(850));
  EXPECT_TRUE(cfg.in_gamma(3));
}

TEST(Sampler, Deterministic) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  const auto cfg = small_config();
  const auto a = run(cfg, s.inputs(), std::string("a"));
  const auto b = run(cfg, s.inputs(), std::string("a"));
  EXPECT_EQ(a.x_final, b.x_final);
  ASSERT_EQ(a.trace.steps.size(), b.trace.steps.size());
  for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
    EXPECT_EQ(a.trace.steps[i].data_consistency, b.trace.steps[i].data_consistency);
    EXPECT_EQ(a.trace.steps[i].dsm_loss, b.trace.steps[i].dsm_loss);
  }
  auto other = cfg;
  other.seed = 10;
  EXPECT_NE(run(other, s.inputs(), std::string("a")).x_final, a.x_final);
}

TEST(Sampler, TraceLayout) {
  Fixture s(ForwardOperator::downsample(kShape, 2));
  const auto cfg = small_config();
  const auto r = run(cfg, s.inputs(), std::string("b"));
  const auto steps = subsample_steps(s.schedule, cfg.nfe);
  ASSERT_EQ(r.trace.steps.size(), steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& rec = r.trace.steps[i];
    EXPECT_EQ(rec.t, steps[i]);
    EXPECT_EQ(rec.t_prev, i + 1 < steps.size() ? steps[i + 1] : 0);
    EXPECT_EQ(rec.branch, cfg.in_gamma(rec.t) ? Branch::Gamma : Branch::Plain);
    EXPECT_TRUE(std::isfinite(rec.data_consistency));
    EXPECT_TRUE(std::isfinite(rec.dsm_loss));
    EXPECT_EQ(rec.null_similarity, 0.0);
  }
  EXPECT_EQ(r.x_final, s.codec.decode(r.z_final));
}

TEST(Sampler, ReducesToPlainDdim) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0), NullMode::UniformMarginal);
  auto cfg = small_config();
  cfg.gamma_tmax = 0;
  cfg.stochasticity = Stochasticity::Deterministic;
  std::vector<std::tuple<double, Vector, double>> comps;
  for (const auto& c : s.prior.concepts())
    for (const auto& g : c.components) comps.emplace_back(0.5 * g.weight, g.mean, g.variance);

  std::optional<Vector> z_ref;
  int checked = 0;
  run(cfg, s.inputs(), std::nullopt, [&](const StepView& v) {
    EXPECT_EQ(v.branch, Branch::Plain);
    if (!z_ref) z_ref = v.z_t;
    const double a = s.schedule.alpha_bar(v.t);
    const double ap = s.schedule.alpha_bar(v.t_prev);
    const Vector x0 = reference_mean(comps, *z_ref, a);
    const Vector eps = (*z_ref - std::sqrt(a) * x0) / std::sqrt(1 - a);
    const Vector next = std::sqrt(ap) * x0 + std::sqrt(1 - ap) * eps;
    EXPECT_LE((next - v.z_next).cwiseAbs().maxCoeff(), 1e-12 * (1 + next.norm())) << "t=" << v.t;
    z_ref = next;
    ++checked;
  });
  EXPECT_EQ(checked, cfg.nfe);
}

TEST(Sampler, DivergenceGuard) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  auto cfg = small_config();
  cfg.omega1 = 1e9;
  cfg.gamma_tmax = 0;
  try {
    run(cfg, s.inputs(), std::string("a"));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.timestep(), 1);
  }
}

TEST(Sampler, CustomNoiseValidation) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  auto cfg = small_config();
  cfg.stochasticity = Stochasticity::Custom;
  cfg.custom_noise.assign(10, 0.0);
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), ConfigError);
  cfg.custom_noise.assign(1001, 0.0);
  EXPECT_NO_THROW(run(cfg, s.inputs(), std::string("a")));
  cfg.custom_noise[980] = 1.0;
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), ConfigError);
}

TEST(Sampler, ConfigErrors) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  auto cfg = small_config();
  cfg.nfe = 1001;
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), ConfigError);
  cfg = small_config();
  cfg.gamma_tmax = 1001;
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), ConfigError);
  cfg = small_config();
  cfg.omega1 = -1;
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), ConfigError);
  EXPECT_THROW(run(small_config(), s.inputs(), std::string("zebra")), LookupError);
}

TEST(Sampler, NonlinearNeedsAdam) {
  Fixture s(ForwardOperator::phase_retrieval(kShape, 2));
  auto cfg = small_config();
  EXPECT_THROW(run(cfg, s.inputs(), std::string("a")), UnsupportedOperator);
  cfg.use_adam = true;
  cfg.adam.iters = 5;
  EXPECT_NO_THROW(run(cfg, s.inputs(), std::string("a")));
}

TEST(Sampler, NegationLowersSimilarityOnGammaSteps) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  NegationParams np;
  np.dim = 6;
  np.lr = 0.05;
  s.embedding = EmbeddingState::build(s.prior, s.codec, np);
  const auto r = run(small_config(), s.inputs(true), std::string("a"));
  int gamma = 0;
  for (const auto& rec : r.trace.steps) {
    if (rec.branch != Branch::Gamma) {
      EXPECT_EQ(rec.null_similarity, rec.null_similarity_after);
      continue;
    }
    ++gamma;
    EXPECT_LT(rec.null_similarity_after, rec.null_similarity) << "t=" << rec.t;
  }
  EXPECT_GT(gamma, 0);
}

TEST(Sampler, ZeroRateNegationMatchesNoModule) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  NegationParams np;
  np.dim = 6;
  np.lr = 0.0;
  s.embedding = EmbeddingState::build(s.prior, s.codec, np);
  const auto with = run(small_config(), s.inputs(true), std::string("a"));
  const auto without = run(small_config(), s.inputs(false), std::string("a"));
  EXPECT_EQ(with.x_final, without.x_final);
  EXPECT_EQ(with.z_final, without.z_final);
}

TEST(Sampler, NegationDisabledKeepsState) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  NegationParams np;
  np.dim = 6;
  s.embedding = EmbeddingState::build(s.prior, s.codec, np);
  auto cfg = small_config();
  cfg.negation_enabled = false;
  EXPECT_EQ(run(cfg, s.inputs(true), std::string("a")).x_final,
            run(cfg, s.inputs(false), std::string("a")).x_final);
}

TEST(Sampler, DpsGradient) {
  const auto r = validation::check_dps_gradients(21, 30, 1e-5);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(Sampler, DpsStepIsGradientStep) {
  Fixture s(ForwardOperator::box_inpaint(kShape, box_mask(kShape, 1, 1, 3, 3)));
  Rng rng(22);
  const Vector z = rng.normal_vector(4);
  const Vector zp = rng.normal_vector(4);
  const auto w = s.prior.uniform_weights();
  const Vector g = dps_gradient(s.inputs(), z, 300, 0.0, w, 0, DpsLoss::Squared);
  const Vector step = dps_step(zp, z, 300, s.inputs(), 0.25, 0.0, w, 0, DpsLoss::Squared);
  EXPECT_LE((step - (zp - 0.25 * g)).norm(), 1e-15);
}

TEST(Sampler, DpsBranchRuns) {
  Fixture s(ForwardOperator::box_inpaint(kShape, box_mask(kShape, 1, 1, 3, 3)));
  auto cfg = small_config();
  cfg.dps_enabled = true;
  const auto r = run(cfg, s.inputs(), std::string("a"));
  for (const auto& rec : r.trace.steps) EXPECT_EQ(rec.branch, cfg.in_gamma(rec.t) ? Branch::Gamma : Branch::Dps);
}

TEST(Sampler, FinalPhaseConsistency) {
  Fixture s(ForwardOperator::gaussian_blur(kShape, 3, 1.0));
  auto cfg = small_config();
  cfg.nfe = 200;
  const auto r = run(cfg, s.inputs(), std::string("a"));
  std::vector<double> dc;
  for (const auto& rec : r.trace.steps)
    if (rec.branch == Branch::Gamma) dc.push_back(rec.data_consistency);
  ASSERT_GE(dc.size(), 2u);
  EXPECT_LE(dc.back(), 0.1 * dc.front());
}
