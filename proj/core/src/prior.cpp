#include "treg/prior.hpp"

#include "treg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace treg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_latent(const Vector& z, int dim) {
  if (z.size() != dim)
    throw ShapeError("latent has dimension " + std::to_string(z.size()) + ", prior expects " +
                     std::to_string(dim));
}

double abar_for_prediction(const NoiseSchedule& sched, int t) {
  if (t < 1 || t > sched.steps())
    throw RangeError("timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(sched.steps()) + "]");
  return sched.alpha_bar(t);
}

}  // namespace

ConceptPrior::ConceptPrior(int dim, std::vector<Concept> concepts, NullMode null_mode)
    : dim_(dim), concepts_(std::move(concepts)), null_mode_(null_mode) {
  if (dim_ < 1) throw ConfigError("prior.d must be >= 1");
  if (concepts_.empty()) throw ConfigError("prior.concepts must not be empty");
  std::set<std::string> labels;
  for (const auto& c : concepts_) {
    if (!labels.insert(c.label).second) throw ConfigError("prior: duplicate concept label '" + c.label + "'");
    if (c.components.empty()) throw ConfigError("prior: concept '" + c.label + "' has no components");
    double total = 0.0;
    for (const auto& comp : c.components) {
      if (!(comp.weight > 0.0)) throw ConfigError("prior: concept '" + c.label + "' has a non-positive weight");
      if (!(comp.variance > 0.0) || !std::isfinite(comp.variance))
        throw ConfigError("prior: concept '" + c.label + "' has a non-positive variance");
      if (comp.mean.size() != dim_)
        throw ConfigError("prior: concept '" + c.label + "' mean has wrong dimension");
      if (!comp.mean.allFinite()) throw ConfigError("prior: concept '" + c.label + "' mean is not finite");
      total += comp.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("prior: weights of concept '" + c.label + "' do not sum to 1");
  }
}

int ConceptPrior::index_of(std::string_view label) const {
  for (int k = 0; k < num_concepts(); ++k)
    if (concepts_[k].label == label) return k;
  throw LookupError("unknown concept '" + std::string(label) + "'");
}

std::vector<double> ConceptPrior::uniform_weights() const {
  return std::vector<double>(concepts_.size(), 1.0 / static_cast<double>(concepts_.size()));
}

Vector ConceptPrior::concept_mean(int k) const {
  Vector m = Vector::Zero(dim_);
  for (const auto& comp : concepts_.at(k).components) m += comp.weight * comp.mean;
  return m;
}

Mixture Mixture::of_concept(const ConceptPrior& prior, int k) {
  if (k < 0 || k >= prior.num_concepts()) throw LookupError("concept index out of range");
  std::vector<Term> terms;
  for (const auto& comp : prior.concept_at(k).components)
    terms.push_back({std::log(comp.weight), &comp.mean, comp.variance});
  return Mixture(prior.dim(), std::move(terms));
}

Mixture Mixture::of_null(const ConceptPrior& prior, std::span<const double> weights) {
  if (static_cast<int>(weights.size()) != prior.num_concepts())
    throw ContractViolation("null weights: expected " + std::to_string(prior.num_concepts()) +
                            " entries, got " + std::to_string(weights.size()));
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractViolation("null weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("null weights must sum to 1");

  std::vector<Term> terms;
  for (int k = 0; k < prior.num_concepts(); ++k) {
    const double log_pi = weights[k] > 0.0 ? std::log(weights[k]) : kNegInf;
    for (const auto& comp : prior.concept_at(k).components)
      terms.push_back({log_pi + std::log(comp.weight), &comp.mean, comp.variance});
  }
  return Mixture(prior.dim(), std::move(terms));
}

Posterior posterior(const Mixture& mix, const Vector& z_t, double abar) {
  check_latent(z_t, mix.dim());
  if (!(abar > 0.0 && abar <= 1.0)) throw RangeError("alpha_bar must lie in (0, 1]");
  const double sa = std::sqrt(abar);
  const double d = static_cast<double>(mix.dim());
  const auto& terms = mix.terms();
  const std::size_t n = terms.size();

  Posterior post;
  post.responsibility.assign(n, 0.0);
  post.component_mean.resize(n);
  post.gain.resize(n);
  post.log_grad.resize(n);

  std::vector<double> log_lik(n, kNegInf);
  double max_log = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& term = terms[i];
    const double s2 = abar * term.variance + (1.0 - abar);
    Vector diff = z_t - sa * (*term.mean);
    post.gain[i] = sa * term.variance / s2;
    post.component_mean[i] = *term.mean + post.gain[i] * diff;
    post.log_grad[i] = -diff / s2;
    if (term.log_weight == kNegInf) continue;
    log_lik[i] = term.log_weight - 0.5 * d * std::log(2.0 * std::numbers::pi * s2) -
                 diff.squaredNorm() / (2.0 * s2);
    max_log = std::max(max_log, log_lik[i]);
  }
  if (max_log == kNegInf) throw ContractViolation("mixture has no component with positive weight");

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_lik[i] == kNegInf) continue;
    post.responsibility[i] = std::exp(log_lik[i] - max_log);
    total += post.responsibility[i];
  }
  post.mean = Vector::Zero(mix.dim());
  for (std::size_t i = 0; i < n; ++i) {
    post.responsibility[i] /= total;
    if (post.responsibility[i] != 0.0) post.mean += post.responsibility[i] * post.component_mean[i];
  }
  return post;
}

Vector posterior_mean(const Mixture& mix, const Vector& z_t, double abar) {
  return posterior(mix, z_t, abar).mean;
}

Matrix posterior_mean_jacobian(const Mixture& mix, const Vector& z_t, double abar) {
  const Posterior post = posterior(mix, z_t, abar);
  const Eigen::Index d = mix.dim();
  Matrix jac = Matrix::Zero(d, d);
  double diag = 0.0;
  for (std::size_t i = 0; i < post.responsibility.size(); ++i) {
    const double r = post.responsibility[i];
    if (r == 0.0) continue;
    diag += r * post.gain[i];
    // responsibility gradient: r_i (g_i - sum_j r_j g_j); folded into (mu_i - E) g_i^T
    jac.noalias() += r * (post.component_mean[i] - post.mean) * post.log_grad[i].transpose();
  }
  jac.diagonal().array() += diag;
  return jac;
}

Vector posterior_mean_vjp(const Mixture& mix, const Vector& z_t, double abar, const Vector& v) {
  const Posterior post = posterior(mix, z_t, abar);
  if (v.size() != mix.dim()) throw ShapeError("vjp cotangent has wrong dimension");
  Vector out = Vector::Zero(mix.dim());
  double diag = 0.0;
  for (std::size_t i = 0; i < post.responsibility.size(); ++i) {
    const double r = post.responsibility[i];
    if (r == 0.0) continue;
    diag += r * post.gain[i];
    out += (r * (post.component_mean[i] - post.mean).dot(v)) * post.log_grad[i];
  }
  out += diag * v;
  return out;
}

Vector eps_prediction(const Mixture& mix, const Vector& z_t, double abar) {
  if (!(abar < 1.0)) throw SingularityError("epsilon prediction undefined at alpha_bar = 1");
  const Vector mean = posterior_mean(mix, z_t, abar);
  return (z_t - std::sqrt(abar) * mean) / std::sqrt(1.0 - abar);
}

Vector eps_cond(const ConceptPrior& prior, const Vector& z_t, int t, std::string_view concept_label,
                const NoiseSchedule& sched) {
  const int k = prior.index_of(concept_label);
  const double abar = abar_for_prediction(sched, t);
  return eps_prediction(Mixture::of_concept(prior, k), z_t, abar);
}

Vector eps_null(const ConceptPrior& prior, const Vector& z_t, int t, std::span<const double> weights,
                const NoiseSchedule& sched) {
  const double abar = abar_for_prediction(sched, t);
  return eps_prediction(Mixture::of_null(prior, weights), z_t, abar);
}

Vector eps_cfg(const Vector& eps_null, const Vector& eps_c, double omega) {
  if (eps_null.size() != eps_c.size()) throw ShapeError("eps_cfg: dimension mismatch");
  return eps_null + omega * (eps_c - eps_null);
}

Vector tweedie(const Vector& z_t, double abar, const Vector& eps) {
  if (z_t.size() != eps.size()) throw ShapeError("tweedie: dimension mismatch");
  if (!(abar > 0.0)) throw SingularityError("tweedie: alpha_bar must be positive");
  return (z_t - std::sqrt(1.0 - abar) * eps) / std::sqrt(abar);
}

Vector tweedie(const Vector& z_t, int t, const Vector& eps, const NoiseSchedule& sched) {
  return tweedie(z_t, sched.alpha_bar(t), eps);
}

Vector posterior_mean_oracle(const ConceptPrior& prior, const Vector& z_t, int t,
                             std::string_view concept_label, const NoiseSchedule& sched) {
  const int k = prior.index_of(concept_label);
  const double abar = abar_for_prediction(sched, t);
  check_latent(z_t, prior.dim());
  const double sa = std::sqrt(abar);
  const auto& comps = prior.concept_at(k).components;

  // log evidence of each component, then a stabilised normalisation
  std::vector<double> log_ev;
  std::vector<Vector> means;
  for (const auto& c : comps) {
    const double var_marg = abar * c.variance + 1.0 - abar;
    const Vector centered = z_t - sa * c.mean;
    log_ev.push_back(std::log(c.weight) - 0.5 * prior.dim() * std::log(var_marg) -
                     0.5 * centered.squaredNorm() / var_marg);
    means.push_back(c.mean + (sa * c.variance / var_marg) * centered);
  }
  const double top = *std::max_element(log_ev.begin(), log_ev.end());
  double norm = 0.0;
  for (double& l : log_ev) norm += (l = std::exp(l - top));
  Vector out = Vector::Zero(prior.dim());
  for (std::size_t i = 0; i < comps.size(); ++i) out += (log_ev[i] / norm) * means[i];
  return out;
}

Matrix posterior_mean_jacobian(const ConceptPrior& prior, const Vector& z_t, int t,
                               std::string_view concept_label, const NoiseSchedule& sched) {
  const int k = prior.index_of(concept_label);
  return posterior_mean_jacobian(Mixture::of_concept(prior, k), z_t, abar_for_prediction(sched, t));
}

Matrix posterior_mean_jacobian_null(const ConceptPrior& prior, const Vector& z_t, int t,
                                    std::span<const double> weights, const NoiseSchedule& sched) {
  return posterior_mean_jacobian(Mixture::of_null(prior, weights), z_t, abar_for_prediction(sched, t));
}

}  // namespace treg
