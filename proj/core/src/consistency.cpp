#include "treg/consistency.hpp"

#include "treg/errors.hpp"

#include <cmath>

namespace treg {

void validate(const CGParams& p) {
  if (!(p.lambda > 0.0)) throw ConfigError("solver.cg.lambda must be > 0");
  if (p.iters < 1) throw ConfigError("solver.cg.iters must be >= 1");
  if (!(p.tol >= 0.0)) throw ConfigError("solver.cg.tol must be >= 0");
}

void validate(const AdamParams& p) {
  if (!(p.lr > 0.0)) throw ConfigError("solver.adam.lr must be > 0");
  if (!(p.beta1 > 0.0 && p.beta1 < 1.0)) throw ConfigError("solver.adam.beta1 must lie in (0, 1)");
  if (!(p.beta2 > 0.0 && p.beta2 < 1.0)) throw ConfigError("solver.adam.beta2 must lie in (0, 1)");
  if (p.iters < 1) throw ConfigError("solver.adam.iters must be >= 1");
  if (!(p.lambda >= 0.0)) throw ConfigError("solver.adam.lambda must be >= 0");
  if (!(p.epsilon > 0.0)) throw ConfigError("solver.adam.epsilon must be > 0");
}

double proximal_objective(const ForwardOperator& op, const Vector& y, const Vector& anchor, double lambda,
                          const Vector& x) {
  return lambda * (x - anchor).squaredNorm() + data_residual(op, x, y);
}

CGResult cg_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, const CGParams& params,
                  const std::optional<Vector>& warm_start) {
  if (!op.is_linear()) throw UnsupportedOperator("cg_solve needs a linear operator, got " + op.id());
  validate(params);
  if (anchor.size() != op.in_dim()) throw ShapeError("cg_solve: anchor has the wrong size");
  if (y.size() != op.out_dim()) throw ShapeError("cg_solve: measurement has the wrong size");

  const double lambda = params.lambda;
  auto normal = [&](const Vector& v) -> Vector { return lambda * v + op.adjoint(op.apply(v)); };

  CGResult res;
  res.x = warm_start ? *warm_start : anchor;
  if (res.x.size() != op.in_dim()) throw ShapeError("cg_solve: warm start has the wrong size");

  const Vector b = lambda * anchor + op.adjoint(y);
  Vector r = b - normal(res.x);
  Vector p = r;
  double rr = r.squaredNorm();
  res.residual_norms.push_back(std::sqrt(rr));

  for (int k = 0; k < params.iters; ++k) {
    if (rr == 0.0) break;
    if (params.tol > 0.0 && std::sqrt(rr) <= params.tol) break;
    const Vector mp = normal(p);
    const double alpha = rr / p.dot(mp);
    res.x += alpha * p;
    r -= alpha * mp;
    const double rr_next = r.squaredNorm();
    res.residual_norms.push_back(std::sqrt(rr_next));
    ++res.iterations;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return res;
}

Vector adam_solve(const ForwardOperator& op, const Vector& y, const Vector& anchor, const AdamParams& params,
                  const std::optional<Vector>& init) {
  validate(params);
  if (anchor.size() != op.in_dim()) throw ShapeError("adam_solve: anchor has the wrong size");
  Vector x = init ? *init : anchor;
  if (x.size() != op.in_dim()) throw ShapeError("adam_solve: init has the wrong size");

  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  double b1_pow = 1.0, b2_pow = 1.0;
  for (int k = 0; k < params.iters; ++k) {
    Vector g = op.residual_gradient(x, y);
    if (params.lambda > 0.0) g += 2.0 * params.lambda * (x - anchor);
    m = params.beta1 * m + (1.0 - params.beta1) * g;
    v = params.beta2 * v + (1.0 - params.beta2) * g.cwiseAbs2();
    b1_pow *= params.beta1;
    b2_pow *= params.beta2;
    const Vector m_hat = m / (1.0 - b1_pow);
    const Vector v_hat = v / (1.0 - b2_pow);
    x.array() -= params.lr * m_hat.array() / (v_hat.array().sqrt() + params.epsilon);
  }
  return x;
}

}  // namespace treg
