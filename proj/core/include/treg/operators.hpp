#pragma once

#include "treg/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace treg {

enum class OperatorKind { Downsample, GaussianBlur, BoxInpaint, PhaseRetrieval };

// Forward measurement map A. Immutable; copies share state and may be used
// from several threads at once.
class ForwardOperator {
 public:
  struct Impl;

  static ForwardOperator downsample(ImageShape shape, int factor);
  // Odd kernel_size <= min(h, w); circular boundary.
  static ForwardOperator gaussian_blur(ImageShape shape, int kernel_size, double sigma);
  // mask[i] == 1 keeps pixel i, 0 zeroes it.
  static ForwardOperator box_inpaint(ImageShape shape, std::vector<std::uint8_t> mask);
  // |DFT(zero_pad(x, pad))|, pad pixels on every side.
  static ForwardOperator phase_retrieval(ImageShape shape, int pad);

  OperatorKind kind() const;
  ImageShape in_shape() const;
  int in_dim() const { return in_shape().size(); }
  int out_dim() const;
  bool is_linear() const;
  // Short description, e.g. "blur(k=7,sigma=1.5)@16x16".
  std::string id() const;

  Vector apply(const Vector& x) const;
  // Linear operators only; UnsupportedOperator otherwise.
  Vector adjoint(const Vector& y) const;
  // grad_x ||y - A(x)||^2. Phase retrieval uses a zero subgradient at bins
  // where |F P x| == 0.
  Vector residual_gradient(const Vector& x, const Vector& y) const;

 private:
  explicit ForwardOperator(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// Mask with the rectangle [row0, row1) x [col0, col1) removed.
std::vector<std::uint8_t> box_mask(ImageShape shape, int row0, int col0, int row1, int col1);

// ||y - A(x)||^2
double data_residual(const ForwardOperator& op, const Vector& x, const Vector& y);

struct Measurement {
  Vector y;
  double sigma0 = 0.0;
  std::string op_id;
  std::uint64_t seed = 0;
};

// y = A(x_true) + sigma0 * eps, eps ~ N(0, I) from the given seed.
Measurement simulate_measurement(const ForwardOperator& op, const Vector& x_true, double sigma0,
                                 std::uint64_t seed);

}  // namespace treg
