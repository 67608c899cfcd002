#pragma once

#include "treg/schedule.hpp"
#include "treg/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace treg {

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  double variance = 1.0;  // isotropic
};

struct Concept {
  std::string label;
  std::vector<GaussianComponent> components;
};

// How the unconditional (null) prediction mixes the concepts.
enum class NullMode { UniformMarginal, EmbeddingWeighted };

// Per-concept isotropic Gaussian mixtures over the latent space. Stands in for
// a trained text-conditional denoiser: every prediction below is exact.
class ConceptPrior {
 public:
  ConceptPrior(int dim, std::vector<Concept> concepts,
               NullMode null_mode = NullMode::UniformMarginal);

  int dim() const { return dim_; }
  int num_concepts() const { return static_cast<int>(concepts_.size()); }
  const Concept& concept_at(int k) const { return concepts_.at(k); }
  const std::vector<Concept>& concepts() const { return concepts_; }
  NullMode null_mode() const { return null_mode_; }

  // Throws LookupError for unknown labels.
  int index_of(std::string_view label) const;

  std::vector<double> uniform_weights() const;
  // Weighted mean of the concept's components.
  Vector concept_mean(int k) const;

 private:
  int dim_;
  std::vector<Concept> concepts_;
  NullMode null_mode_;
};

// A weighted view over prior components; the distribution a prediction is
// taken under. Borrows component storage from the prior it was built from.
class Mixture {
 public:
  struct Term {
    double log_weight;
    const Vector* mean;
    double variance;
  };

  static Mixture of_concept(const ConceptPrior& prior, int k);
  // weights must lie on the K-simplex (tolerance 1e-9).
  static Mixture of_null(const ConceptPrior& prior, std::span<const double> weights);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  Mixture(int dim, std::vector<Term> terms) : dim_(dim), terms_(std::move(terms)) {}
  int dim_;
  std::vector<Term> terms_;
};

// Posterior of z0 given z_t = sqrt(abar) z0 + sqrt(1 - abar) eps.
struct Posterior {
  Vector mean;
  std::vector<double> responsibility;
  std::vector<Vector> component_mean;
  std::vector<double> gain;      // d mu_i / d z_t = gain_i * I
  std::vector<Vector> log_grad;  // grad_z log N(z_t; sqrt(abar) m_i, s_i^2 I)
};

Posterior posterior(const Mixture& mix, const Vector& z_t, double abar);
Vector posterior_mean(const Mixture& mix, const Vector& z_t, double abar);
Matrix posterior_mean_jacobian(const Mixture& mix, const Vector& z_t, double abar);
// J^T v without forming J.
Vector posterior_mean_vjp(const Mixture& mix, const Vector& z_t, double abar, const Vector& v);
// eps = (z_t - sqrt(abar) E[z0 | z_t]) / sqrt(1 - abar); abar < 1.
Vector eps_prediction(const Mixture& mix, const Vector& z_t, double abar);

Vector eps_cond(const ConceptPrior& prior, const Vector& z_t, int t, std::string_view concept_label,
                const NoiseSchedule& sched);
Vector eps_null(const ConceptPrior& prior, const Vector& z_t, int t, std::span<const double> weights,
                const NoiseSchedule& sched);
// eps_null + omega (eps_c - eps_null)
Vector eps_cfg(const Vector& eps_null, const Vector& eps_c, double omega);

// (z_t - sqrt(1 - abar) eps) / sqrt(abar). t = 0 is the noiseless sentinel.
Vector tweedie(const Vector& z_t, int t, const Vector& eps, const NoiseSchedule& sched);
Vector tweedie(const Vector& z_t, double abar, const Vector& eps);

// Closed-form E[z0 | z_t, concept], written independently of posterior() for
// cross-checking the eps/tweedie path.
Vector posterior_mean_oracle(const ConceptPrior& prior, const Vector& z_t, int t,
                             std::string_view concept_label, const NoiseSchedule& sched);

Matrix posterior_mean_jacobian(const ConceptPrior& prior, const Vector& z_t, int t,
                               std::string_view concept_label, const NoiseSchedule& sched);
Matrix posterior_mean_jacobian_null(const ConceptPrior& prior, const Vector& z_t, int t,
                                    std::span<const double> weights, const NoiseSchedule& sched);

}  // namespace treg
