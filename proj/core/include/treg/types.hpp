#pragma once

#include <Eigen/Dense>

#include <string>

namespace treg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Row-major pixel grid. Images are stored flattened, index = row * width + col.
struct ImageShape {
  int height = 0;
  int width = 0;

  int size() const { return height * width; }
  bool operator==(const ImageShape&) const = default;
  std::string str() const { return std::to_string(height) + "x" + std::to_string(width); }
};

// Rotate a flattened image by 180 degrees.
Vector flip180(const Vector& image);

}  // namespace treg
