#pragma once

#include "treg/operators.hpp"
#include "treg/types.hpp"

#include <vector>

namespace treg::harness {

// 10 log10(peak^2 / MSE); +inf when the inputs agree exactly.
double psnr(const Vector& x, const Vector& ref, double peak);

// ||y - A(x)||^2 / n
double y_mse(const ForwardOperator& op, const Vector& x, const Vector& y);

struct VarianceMap {
  Vector variance;             // per pixel, n - 1 normalisation
  std::vector<double> profile; // variance along one image row
  double mean = 0.0;
};

VarianceMap pixel_variance(const std::vector<Vector>& runs, ImageShape shape, int row);

}  // namespace treg::harness
