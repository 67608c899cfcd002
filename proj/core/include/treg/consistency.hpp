#pragma once

#include "treg/operators.hpp"

#include <optional>
#include <vector>

namespace treg {

// Proximal data-consistency parameters. The measurement-noise variance is
// absorbed into lambda.
struct CGParams {
  double lambda = 1e-4;
  int iters = 5;
  double tol = 0.0;  // early exit on system-residual norm; 0 disables
};

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int iters = 50;
  double lambda = 0.0;
  double epsilon = 1e-8;
};

struct CGResult {
  Vector x;
  // ||b - (lambda I + A^T A) x_k|| for k = 0 .. iterations
  std::vector<double> residual_norms;
  int iterations = 0;
};

void validate(const CGParams& p);
void validate(const AdamParams& p);

// lambda ||x - anchor||^2 + ||y - A x||^2
double proximal_objective(const ForwardOperator& op, const Vector& y, const Vector& anchor, double lambda,
                          const Vector& x);

// CG on (lambda I + A^T A) x = lambda anchor + A^T y, started from warm_start
// (anchor when empty). Linear operators only.
CGResult cg_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, const CGParams& params,
                  const std::optional<Vector>& warm_start = std::nullopt);

// Adam on ||y - A(x)||^2 + lambda ||x - anchor||^2, started from init (anchor
// when empty). Works for any operator through residual_gradient.
Vector adam_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, const AdamParams& params,
                  const std::optional<Vector>& init = std::nullopt);

}  // namespace treg
