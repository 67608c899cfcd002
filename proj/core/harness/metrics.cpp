#include "treg/harness/metrics.hpp"

#include "treg/errors.hpp"

#include <cmath>
#include <limits>

namespace treg::harness {

double psnr(const Vector& x, const Vector& ref, double peak) {
  if (x.size() != ref.size()) throw ShapeError("psnr: shape mismatch");
  if (!(peak > 0.0)) throw RangeError("psnr: peak must be > 0");
  const double mse = (x - ref).squaredNorm() / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double y_mse(const ForwardOperator& op, const Vector& x, const Vector& y) {
  return data_residual(op, x, y) / static_cast<double>(y.size());
}

VarianceMap pixel_variance(const std::vector<Vector>& runs, ImageShape shape, int row) {
  if (runs.size() < 2) throw ContractViolation("pixel_variance needs at least two runs");
  const auto m = runs.front().size();
  if (m != shape.size()) throw ShapeError("pixel_variance: runs do not match the image shape");
  if (row < 0 || row >= shape.height) throw RangeError("pixel_variance: profile row out of range");
  // shifted by the first run, so identical runs give exact zeros
  const Vector& pivot = runs.front();
  const double n = static_cast<double>(runs.size());
  Vector sum = Vector::Zero(m);
  Vector sum_sq = Vector::Zero(m);
  for (const auto& r : runs) {
    if (r.size() != m) throw ShapeError("pixel_variance: runs differ in size");
    const Vector d = r - pivot;
    sum += d;
    sum_sq += d.cwiseAbs2();
  }
  VarianceMap out;
  out.variance = ((sum_sq - sum.cwiseAbs2() / n) / (n - 1.0)).cwiseMax(0.0);
  out.mean = out.variance.mean();
  for (int c = 0; c < shape.width; ++c) out.profile.push_back(out.variance[row * shape.width + c]);
  return out;
}

}  // namespace treg::harness
