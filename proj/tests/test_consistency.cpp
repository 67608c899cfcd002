#include "treg/consistency.hpp"
#include "treg/errors.hpp"
#include "treg/rng.hpp"
#include "treg/validation.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace treg;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

const ImageShape kPair{1, 2};

}  // namespace

TEST(CG, IdentityExample) {
  const auto op = ForwardOperator::box_inpaint(kPair, {1, 1});
  const auto r = cg_solve(op, vec2(1, 0), vec2(0, 0), CGParams{1.0, 5, 0.0});
  EXPECT_NEAR(r.x[0], 0.5, 1e-15);
  EXPECT_NEAR(r.x[1], 0.0, 1e-15);
}

TEST(CG, MaskExample) {
  const auto op = ForwardOperator::box_inpaint(kPair, {1, 0});
  const auto r = cg_solve(op, vec2(2, 123.0), vec2(1, 1), CGParams{0.5, 5, 0.0});
  EXPECT_NEAR(r.x[0], 5.0 / 3.0, 1e-14);
  EXPECT_NEAR(r.x[1], 1.0, 1e-14);
  const Vector dense = validation::dense_proximal_solve(op, vec2(2, 123.0), vec2(1, 1), 0.5);
  EXPECT_NEAR(dense[0], 5.0 / 3.0, 1e-14);
  EXPECT_NEAR(dense[1], 1.0, 1e-14);
}

TEST(CG, Defaults) {
  const CGParams p;
  EXPECT_EQ(p.lambda, 1e-4);
  EXPECT_EQ(p.iters, 5);
  EXPECT_EQ(p.tol, 0.0);
  const AdamParams a;
  EXPECT_EQ(a.lr, 1e-3);
  EXPECT_EQ(a.beta1, 0.9);
  EXPECT_EQ(a.beta2, 0.999);
  EXPECT_EQ(a.lambda, 0.0);
}

TEST(CG, Errors) {
  const auto op = ForwardOperator::box_inpaint(kPair, {1, 1});
  EXPECT_THROW(cg_solve(op, vec2(1, 0), vec2(0, 0), CGParams{0.0, 5, 0.0}), ConfigError);
  EXPECT_THROW(cg_solve(op, vec2(1, 0), vec2(0, 0), CGParams{-1.0, 5, 0.0}), ConfigError);
  EXPECT_THROW(cg_solve(op, vec2(1, 0), vec2(0, 0), CGParams{1.0, 0, 0.0}), ConfigError);
  const auto phase = ForwardOperator::phase_retrieval(kPair, 1);
  EXPECT_THROW(cg_solve(phase, Vector::Zero(phase.out_dim()), vec2(0, 0), CGParams{}), UnsupportedOperator);
  EXPECT_THROW(cg_solve(op, vec2(1, 0), Vector::Zero(3), CGParams{}), ShapeError);
}

TEST(CG, MatchesDenseSolve) {
  const auto r = validation::check_cg_dense(11, 50, 1e-8);
  EXPECT_TRUE(r.passed) << r.worst;
}

// The objective differs from the energy norm of the error by a constant, so
// it is the quantity CG decreases monotonically.
TEST(CG, EnergyErrorNonIncreasing) {
  Rng rng(12);
  for (int c = 0; c < 40; ++c) {
    const auto op = validation::random_linear_operator(rng, 64);
    const Vector y = rng.normal_vector(op.out_dim());
    const Vector anchor = rng.normal_vector(op.in_dim());
    const double lambda = c % 2 ? 1e-4 : 0.5;
    const Vector exact = validation::dense_proximal_solve(op, y, anchor, lambda);
    const Matrix a = validation::dense_matrix(op);
    const Matrix normal = lambda * Matrix::Identity(op.in_dim(), op.in_dim()) + a.transpose() * a;
    double prev = std::numeric_limits<double>::infinity();
    double prev_obj = prev;
    for (int it = 1; it <= 10; ++it) {
      const Vector x = cg_solve(op, y, anchor, CGParams{lambda, it, 0.0}).x;
      const Vector e = x - exact;
      const double energy = e.dot(normal * e);
      const double obj = proximal_objective(op, y, anchor, lambda, x);
      EXPECT_LE(energy, prev * (1 + 1e-9) + 1e-24) << op.id() << " step " << it;
      EXPECT_LE(obj, prev_obj * (1 + 1e-12)) << op.id() << " step " << it;
      prev = energy;
      prev_obj = obj;
    }
  }
}

TEST(CG, ResidualHistoryShape) {
  const auto op = ForwardOperator::gaussian_blur(ImageShape{6, 6}, 3, 1.0);
  Rng rng(18);
  const auto r = cg_solve(op, rng.normal_vector(36), rng.normal_vector(36), CGParams{1e-2, 7, 0.0});
  EXPECT_EQ(r.iterations, 7);
  ASSERT_EQ(r.residual_norms.size(), 8u);
  EXPECT_LT(r.residual_norms.back(), r.residual_norms.front());
}

TEST(CG, WarmStartAtSolutionStays) {
  const auto op = ForwardOperator::gaussian_blur(ImageShape{6, 6}, 3, 1.0);
  Rng rng(13);
  const Vector y = rng.normal_vector(36);
  const Vector anchor = rng.normal_vector(36);
  const Vector exact = validation::dense_proximal_solve(op, y, anchor, 0.1);
  const auto r = cg_solve(op, y, anchor, CGParams{0.1, 5, 0.0}, exact);
  EXPECT_LE((r.x - exact).norm(), 1e-10 * exact.norm());
}

TEST(CG, ToleranceExits) {
  const auto op = ForwardOperator::box_inpaint(kPair, {1, 1});
  const auto r = cg_solve(op, vec2(1, 0), vec2(0, 0), CGParams{1.0, 50, 1e-9});
  EXPECT_LE(r.iterations, 2);
}

TEST(CG, ObjectiveDecreasesWithIterations) {
  const auto op = ForwardOperator::gaussian_blur(ImageShape{8, 8}, 5, 1.5);
  Rng rng(14);
  const Vector y = rng.normal_vector(64);
  const Vector anchor = rng.normal_vector(64);
  double prev = proximal_objective(op, y, anchor, 1e-3, anchor);
  for (int it = 1; it <= 8; ++it) {
    const double f = proximal_objective(op, y, anchor, 1e-3, cg_solve(op, y, anchor, CGParams{1e-3, it, 0.0}).x);
    EXPECT_LE(f, prev);
    prev = f;
  }
}

TEST(Adam, DescendsOnQuadratic) {
  const auto op = ForwardOperator::downsample(ImageShape{8, 8}, 2);
  Rng rng(15);
  const Vector y = rng.normal_vector(16);
  const Vector anchor = rng.normal_vector(64);
  AdamParams p;
  p.lambda = 0.1;
  p.iters = 100;
  const Vector x = adam_solve(op, y, anchor, p);
  EXPECT_LT(proximal_objective(op, y, anchor, 0.1, x), proximal_objective(op, y, anchor, 0.1, anchor));
}

TEST(Adam, FixedPointAtSolution) {
  const ImageShape shape{6, 6};
  const auto op = ForwardOperator::box_inpaint(shape, box_mask(shape, 1, 1, 4, 5));
  Rng rng(16);
  const Vector x_star = rng.normal_vector(36);
  const Vector y = op.apply(x_star);
  const Vector exact = cg_solve(op, y, x_star, CGParams{1.0, 5, 0.0}).x;
  EXPECT_LE((exact - x_star).cwiseAbs().maxCoeff(), 1e-15);
  const Vector x = adam_solve(op, y, rng.normal_vector(36), AdamParams{}, exact);
  EXPECT_LE((x - exact).cwiseAbs().maxCoeff(), 1e-8);
}

// Below |g| ~ epsilon the normalised step amplifies rounding, so near a
// numerically exact optimum Adam only stays within its step budget.
TEST(Adam, StaysNearSolution) {
  const auto op = ForwardOperator::gaussian_blur(ImageShape{6, 6}, 3, 1.0);
  Rng rng(16);
  const Vector y = rng.normal_vector(36);
  const Vector anchor = rng.normal_vector(36);
  AdamParams p;
  p.lambda = 0.2;
  const Vector exact = validation::dense_proximal_solve(op, y, anchor, 0.2);
  const Vector x = adam_solve(op, y, anchor, p, exact);
  EXPECT_LE((x - exact).cwiseAbs().maxCoeff(), p.lr * p.iters);
  EXPECT_LE(proximal_objective(op, y, anchor, 0.2, x) - proximal_objective(op, y, anchor, 0.2, exact), 1e-6);
}

TEST(Adam, Deterministic) {
  const auto op = ForwardOperator::phase_retrieval(ImageShape{4, 4}, 2);
  Rng rng(17);
  const Vector y = op.apply(rng.normal_vector(16));
  const Vector anchor = rng.normal_vector(16);
  EXPECT_EQ(adam_solve(op, y, anchor, AdamParams{}), adam_solve(op, y, anchor, AdamParams{}));
}

TEST(Adam, Errors) {
  const auto op = ForwardOperator::box_inpaint(kPair, {1, 1});
  AdamParams p;
  p.lr = 0;
  EXPECT_THROW(adam_solve(op, vec2(0, 0), vec2(0, 0), p), ConfigError);
  p = AdamParams{};
  p.beta1 = 1.0;
  EXPECT_THROW(adam_solve(op, vec2(0, 0), vec2(0, 0), p), ConfigError);
  p = AdamParams{};
  p.lambda = -1;
  EXPECT_THROW(adam_solve(op, vec2(0, 0), vec2(0, 0), p), ConfigError);
  EXPECT_THROW(adam_solve(op, vec2(0, 0), Vector::Zero(3), AdamParams{}), ShapeError);
}
