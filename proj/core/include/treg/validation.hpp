#pragma once

// Independent reference computations. Nothing here calls the code paths it
// is used to check: posterior means come from numerical quadrature, normal
// equations from a dense factorisation, gradients from finite differences.

#include "treg/operators.hpp"
#include "treg/prior.hpp"
#include "treg/rng.hpp"
#include "treg/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace treg::validation {

// Plain-data isotropic mixture.
struct MixtureSpec {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<double> variances;
};

MixtureSpec concept_spec(const ConceptPrior& prior, int k);

// E[z0 | z_t] by per-coordinate composite Simpson quadrature in the log
// domain. Isotropic components factorise over coordinates, so a d-dimensional
// integral is a product of 1-D ones.
Vector quadrature_posterior_mean(const MixtureSpec& mix, const Vector& z_t, double abar);

// Columns A e_i. Linear operators only.
Matrix dense_matrix(const ForwardOperator& op);

// argmin lambda ||x - anchor||^2 + ||y - A x||^2 via Cholesky on the dense normal matrix.
Vector dense_proximal_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, double lambda);

// |<A x, y> - <x, A^T y>| / max(|<A x, y>|, |<x, A^T y>|) for random x, y.
double dot_test(const ForwardOperator& op, Rng& rng);

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double step);

// ||a - b|| / max(||b||, floor)
double relative_error(const Vector& a, const Vector& b, double floor = 1e-300);

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  int cases = 0;
};

// Randomised oracle suites: dot tests, quadrature Tweedie, dense CG and
// finite-difference gradients.
std::vector<CheckResult> run_oracle_suites(std::uint64_t seed);

// Individual suites, shared by the acceptance runner.
CheckResult check_tweedie_quadrature(std::uint64_t seed, int cases, double tol);
CheckResult check_tweedie_closed_form(std::uint64_t seed, int cases, double tol);
CheckResult check_cg_dense(std::uint64_t seed, int cases, double tol);
CheckResult check_adjoints(std::uint64_t seed, int pairs, double tol);
CheckResult check_residual_gradients(std::uint64_t seed, int cases, double tol);
CheckResult check_dps_gradients(std::uint64_t seed, int cases, double tol);
CheckResult check_jacobians(std::uint64_t seed, int cases, double tol);

// Random small problem pieces used by the suites above.
ConceptPrior random_prior(Rng& rng, int dim, int concepts, int max_components);
ForwardOperator random_linear_operator(Rng& rng, int max_pixels);

}  // namespace treg::validation
