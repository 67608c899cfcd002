#include "treg/validation.hpp"

#include "treg/codec.hpp"
#include "treg/consistency.hpp"
#include "treg/errors.hpp"
#include "treg/sampler.hpp"
#include "treg/schedule.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace treg::validation {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Moments {
  double log_mass;
  double mean;
};

// log of integral f and the normalised first moment, where
// f(x) = N(x; m, v) N(z; sqrt(abar) x, 1 - abar).
Moments coordinate_moments(double m, double v, double z, double abar) {
  const double ra = std::sqrt(abar);
  const double noise = 1.0 - abar;
  const double s_prior = std::sqrt(v);
  const double s_like = std::sqrt(noise / abar);
  const double c_like = z / ra;
  const double s_min = std::min(s_prior, s_like);
  const double lo = std::min(m, c_like) - 12.0 * s_min;
  const double hi = std::max(m, c_like) + 12.0 * s_min;
  const double h0 = s_min / 40.0;
  long n = static_cast<long>(std::ceil((hi - lo) / h0));
  n = std::max<long>(n + (n % 2), 2);
  const double h = (hi - lo) / static_cast<double>(n);

  auto log_f = [&](double x) {
    const double a = x - m;
    const double b = z - ra * x;
    return -0.5 * a * a / v - 0.5 * b * b / noise - 0.5 * (kLog2Pi + std::log(v)) - 0.5 * (kLog2Pi + std::log(noise));
  };

  std::vector<double> lf(n + 1);
  double top = -std::numeric_limits<double>::infinity();
  for (long i = 0; i <= n; ++i) {
    lf[i] = log_f(lo + h * static_cast<double>(i));
    top = std::max(top, lf[i]);
  }
  double s0 = 0.0;
  double s1 = 0.0;
  for (long i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double x = lo + h * static_cast<double>(i);
    const double f = w * std::exp(lf[i] - top);
    s0 += f;
    s1 += f * x;
  }
  return {std::log(s0 * h / 3.0) + top, s1 / s0};
}

double dot_relative(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

void record(CheckResult& r, double err) {
  r.worst = std::max(r.worst, err);
  ++r.cases;
}

CheckResult finish(CheckResult r) {
  r.passed = r.worst <= r.tolerance && r.cases > 0;
  return r;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + std::min(hi - lo, static_cast<int>(rng.uniform() * (hi - lo + 1)));
}

std::vector<double> random_simplex(Rng& rng, int k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& v : w) total += (v = 0.05 + rng.uniform());
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

MixtureSpec concept_spec(const ConceptPrior& prior, int k) {
  MixtureSpec spec;
  for (const auto& c : prior.concept_at(k).components) {
    spec.weights.push_back(c.weight);
    spec.means.push_back(c.mean);
    spec.variances.push_back(c.variance);
  }
  return spec;
}

Vector quadrature_posterior_mean(const MixtureSpec& mix, const Vector& z_t, double abar) {
  if (!(abar > 0.0 && abar < 1.0)) throw RangeError("quadrature oracle needs 0 < abar < 1");
  const std::size_t k = mix.weights.size();
  std::vector<double> log_ev(k);
  std::vector<Vector> means(k, Vector(z_t.size()));
  for (std::size_t i = 0; i < k; ++i) {
    double acc = std::log(mix.weights[i]);
    for (Eigen::Index j = 0; j < z_t.size(); ++j) {
      const Moments mo = coordinate_moments(mix.means[i][j], mix.variances[i], z_t[j], abar);
      acc += mo.log_mass;
      means[i][j] = mo.mean;
    }
    log_ev[i] = acc;
  }
  const double top = *std::max_element(log_ev.begin(), log_ev.end());
  double total = 0.0;
  Vector out = Vector::Zero(z_t.size());
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::exp(log_ev[i] - top);
    total += w;
    out += w * means[i];
  }
  return out / total;
}

Matrix dense_matrix(const ForwardOperator& op) {
  const int m = op.in_dim();
  Matrix a(op.out_dim(), m);
  Vector e = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    e[i] = 1.0;
    a.col(i) = op.apply(e);
    e[i] = 0.0;
  }
  return a;
}

Vector dense_proximal_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, double lambda) {
  const Matrix a = dense_matrix(op);
  const Matrix normal = lambda * Matrix::Identity(a.cols(), a.cols()) + a.transpose() * a;
  const Vector rhs = lambda * anchor + a.transpose() * y;
  return normal.llt().solve(rhs);
}

double dot_test(const ForwardOperator& op, Rng& rng) {
  const Vector x = rng.normal_vector(op.in_dim());
  const Vector y = rng.normal_vector(op.out_dim());
  return dot_relative(op.apply(x).dot(y), x.dot(op.adjoint(y)));
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double step) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

ConceptPrior random_prior(Rng& rng, int dim, int concepts, int max_components) {
  std::vector<Concept> cs;
  for (int k = 0; k < concepts; ++k) {
    Concept c;
    c.label = "c" + std::to_string(k);
    const int n = uniform_int(rng, 1, max_components);
    const auto w = random_simplex(rng, n);
    for (int i = 0; i < n; ++i) {
      GaussianComponent g;
      g.weight = w[i];
      g.mean = 6.0 * (Vector::NullaryExpr(dim, [&](Eigen::Index) { return rng.uniform(); }).array() - 0.5).matrix();
      g.variance = 0.1 + 1.9 * rng.uniform();
      c.components.push_back(std::move(g));
    }
    cs.push_back(std::move(c));
  }
  return ConceptPrior(dim, std::move(cs));
}

ForwardOperator random_linear_operator(Rng& rng, int max_pixels) {
  const int kind = uniform_int(rng, 0, 2);
  if (kind == 0) {
    ImageShape s{uniform_int(rng, 3, 8), uniform_int(rng, 3, 8)};
    while (s.size() > max_pixels) --s.width;
    const int k = std::min(s.height, s.width) >= 5 && rng.uniform() < 0.5 ? 5 : 3;
    return ForwardOperator::gaussian_blur(s, k, 0.5 + 1.5 * rng.uniform());
  }
  if (kind == 1) {
    const int f = uniform_int(rng, 2, 3);
    ImageShape s{f * uniform_int(rng, 1, 8 / f), f * uniform_int(rng, 1, 8 / f)};
    return ForwardOperator::downsample(s, f);
  }
  ImageShape s{uniform_int(rng, 2, 8), uniform_int(rng, 2, 8)};
  std::vector<std::uint8_t> mask(s.size());
  for (auto& v : mask) v = rng.uniform() < 0.6 ? 1 : 0;
  return ForwardOperator::box_inpaint(s, std::move(mask));
}

CheckResult check_tweedie_quadrature(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"tweedie vs quadrature", false, 0.0, tol, 0};
  Rng rng(seed, 11);
  const NoiseSchedule sched = make_schedule(1000, 0.00085, 0.012);
  for (int c = 0; c < cases; ++c) {
    const int d = uniform_int(rng, 1, 2);
    const ConceptPrior prior = random_prior(rng, d, 2, 3);
    const int k = uniform_int(rng, 0, 1);
    const int t = uniform_int(rng, 1, sched.steps());
    const double abar = sched.alpha_bar(t);
    const Vector x0 = 4.0 * rng.normal_vector(d);
    const Vector z = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * rng.normal_vector(d);
    const std::string label = prior.concept_at(k).label;
    const Vector got = tweedie(z, t, eps_cond(prior, z, t, label, sched), sched);
    const Vector want = quadrature_posterior_mean(concept_spec(prior, k), z, abar);
    record(r, (got - want).cwiseAbs().maxCoeff());
  }
  return finish(r);
}

CheckResult check_tweedie_closed_form(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"tweedie vs closed form", false, 0.0, tol, 0};
  Rng rng(seed, 12);
  const NoiseSchedule sched = make_schedule(1000, 0.00085, 0.012);
  for (int c = 0; c < cases; ++c) {
    const int d = uniform_int(rng, 1, 2);
    const ConceptPrior prior = random_prior(rng, d, 2, 3);
    const std::string label = prior.concept_at(uniform_int(rng, 0, 1)).label;
    const int t = uniform_int(rng, 1, sched.steps());
    const double abar = sched.alpha_bar(t);
    const Vector z = std::sqrt(abar) * 4.0 * rng.normal_vector(d) + std::sqrt(1.0 - abar) * rng.normal_vector(d);
    const Vector got = tweedie(z, t, eps_cond(prior, z, t, label, sched), sched);
    const Vector want = posterior_mean_oracle(prior, z, t, label, sched);
    record(r, (got - want).cwiseAbs().maxCoeff());
  }
  return finish(r);
}

CheckResult check_cg_dense(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"cg vs dense solve", false, 0.0, tol, 0};
  Rng rng(seed, 13);
  for (int c = 0; c < cases; ++c) {
    const ForwardOperator op = random_linear_operator(rng, 64);
    const double lambda = std::pow(10.0, -2.0 + 2.0 * rng.uniform());
    const Vector y = rng.normal_vector(op.out_dim());
    const Vector anchor = rng.normal_vector(op.in_dim());
    CGParams p;
    p.lambda = lambda;
    p.iters = op.in_dim();
    const Vector got = cg_solve(op, y, anchor, p).x;
    const Vector want = dense_proximal_solve(op, y, anchor, lambda);
    record(r, relative_error(got, want));
  }
  return finish(r);
}

CheckResult check_adjoints(std::uint64_t seed, int pairs, double tol) {
  CheckResult r{"adjoint dot tests", false, 0.0, tol, 0};
  Rng rng(seed, 14);
  std::vector<ForwardOperator> ops = {
      ForwardOperator::gaussian_blur({16, 16}, 7, 1.5),
      ForwardOperator::gaussian_blur({9, 7}, 5, 0.8),
      ForwardOperator::downsample({16, 16}, 2),
      ForwardOperator::downsample({12, 9}, 3),
      ForwardOperator::box_inpaint({16, 16}, box_mask({16, 16}, 4, 4, 12, 12)),
  };
  std::vector<std::uint8_t> mask(10 * 6);
  for (auto& v : mask) v = rng.uniform() < 0.5 ? 1 : 0;
  ops.push_back(ForwardOperator::box_inpaint({10, 6}, mask));
  for (const auto& op : ops)
    for (int i = 0; i < pairs; ++i) record(r, dot_test(op, rng));
  return finish(r);
}

CheckResult check_residual_gradients(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"residual gradient vs finite differences", false, 0.0, tol, 0};
  Rng rng(seed, 15);
  for (int c = 0; c < cases; ++c) {
    ForwardOperator op = c % 2 == 0 ? ForwardOperator::phase_retrieval({uniform_int(rng, 2, 5), uniform_int(rng, 2, 5)},
                                                                        uniform_int(rng, 0, 3))
                                    : random_linear_operator(rng, 36);
    const Vector x = rng.normal_vector(op.in_dim());
    const Vector y = op.apply(rng.normal_vector(op.in_dim())).cwiseAbs();
    const Vector fd = central_difference([&](const Vector& v) { return data_residual(op, v, y); }, x, 1e-6);
    record(r, relative_error(op.residual_gradient(x, y), fd));
  }
  return finish(r);
}

CheckResult check_dps_gradients(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"dps gradient vs finite differences", false, 0.0, tol, 0};
  Rng rng(seed, 16);
  const NoiseSchedule sched = make_schedule(1000, 0.00085, 0.012);
  for (int c = 0; c < cases; ++c) {
    const ImageShape shape{4, 4};
    const int d = uniform_int(rng, 2, 6);
    const LatentCodec codec = LatentCodec::random(shape.size(), d, derive_seed(seed, c));
    const ConceptPrior prior = random_prior(rng, d, 2, 2);
    ForwardOperator op = c % 3 == 0 ? ForwardOperator::phase_retrieval(shape, 2)
                         : c % 3 == 1 ? ForwardOperator::gaussian_blur(shape, 3, 1.0)
                                      : ForwardOperator::downsample(shape, 2);
    const Vector x_true = codec.decode(rng.normal_vector(d));
    const Measurement meas = simulate_measurement(op, x_true, 0.1, derive_seed(seed, 1000 + c));
    const SamplerInputs in{sched, prior, codec, op, meas, nullptr};
    const int t = uniform_int(rng, 20, sched.steps());
    const double omega2 = 4.0 * rng.uniform();
    const auto weights = random_simplex(rng, 2);
    const std::optional<int> concept_index = c % 4 == 3 ? std::nullopt : std::optional<int>(c % 2);
    const DpsLoss loss = c % 5 == 4 ? DpsLoss::Norm : DpsLoss::Squared;
    const Vector z = rng.normal_vector(d);
    const Vector analytic = dps_gradient(in, z, t, omega2, weights, concept_index, loss);
    const Vector fd = central_difference(
        [&](const Vector& v) { return dps_loss(in, v, t, omega2, weights, concept_index, loss); }, z, 1e-5);
    record(r, relative_error(analytic, fd));
    // the step itself is z_prev - rho * gradient
    const Vector z_prev = rng.normal_vector(d);
    const double rho = 0.3;
    const Vector stepped = dps_step(z_prev, z, t, in, rho, omega2, weights, concept_index, loss);
    record(r, relative_error((z_prev - stepped) / rho, fd));
  }
  return finish(r);
}

CheckResult check_jacobians(std::uint64_t seed, int cases, double tol) {
  CheckResult r{"posterior mean jacobian vs finite differences", false, 0.0, tol, 0};
  Rng rng(seed, 17);
  const NoiseSchedule sched = make_schedule(1000, 0.00085, 0.012);
  for (int c = 0; c < cases; ++c) {
    const int d = uniform_int(rng, 1, 4);
    const ConceptPrior prior = random_prior(rng, d, 2, 3);
    const int t = uniform_int(rng, 1, sched.steps());
    const double abar = sched.alpha_bar(t);
    const Vector z = rng.normal_vector(d);
    const Mixture mix = Mixture::of_concept(prior, c % 2);
    const Matrix jac = posterior_mean_jacobian(mix, z, abar);
    Matrix fd(d, d);
    for (int i = 0; i < d; ++i) {
      fd.row(i) = central_difference([&](const Vector& v) { return posterior_mean(mix, v, abar)[i]; }, z, 1e-6)
                      .transpose();
    }
    record(r, (jac - fd).norm() / std::max(fd.norm(), 1e-12));
    const Vector v = rng.normal_vector(d);
    record(r, relative_error(posterior_mean_vjp(mix, z, abar, v), jac.transpose() * v));
  }
  return finish(r);
}

std::vector<CheckResult> run_oracle_suites(std::uint64_t seed) {
  return {
      check_tweedie_quadrature(seed, 100, 1e-6),
      check_tweedie_closed_form(seed, 100, 1e-10),
      check_cg_dense(seed, 50, 1e-8),
      check_adjoints(seed, 100, 1e-10),
      check_residual_gradients(seed, 50, 1e-5),
      check_dps_gradients(seed, 50, 1e-5),
      check_jacobians(seed, 50, 1e-5),
  };
}

}  // namespace treg::validation
