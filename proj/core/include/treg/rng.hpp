#pragma once

#include "treg/types.hpp"

#include <cstdint>
#include <random>

namespace treg {

// Seeded Gaussian stream. A (seed, stream) pair identifies an independent
// sequence so that e.g. monitoring draws never perturb sampling draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Vector normal_vector(Eigen::Index n);
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Deterministic seed derivation (splitmix64 finalizer over the pair).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace treg
