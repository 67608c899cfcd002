#pragma once

#include "treg/rng.hpp"
#include "treg/types.hpp"

#include <cstdint>

namespace treg {

// Linear stand-in for a VAE: an encoder with orthonormal rows and its exact
// transpose as decoder, so encode_mean(decode(z)) == z.
class LatentCodec {
 public:
  // enc must be d x m with orthonormal rows (checked to 1e-10).
  LatentCodec(Matrix enc, double sigma_e);

  // Seeded random orthonormalisation of a Gaussian m x d matrix.
  static LatentCodec random(int pixels, int latent, std::uint64_t seed, double sigma_e = 0.0);

  int pixels() const { return static_cast<int>(enc_.cols()); }
  int latent() const { return static_cast<int>(enc_.rows()); }
  double sigma_e() const { return sigma_e_; }
  const Matrix& encoder() const { return enc_; }

  Vector encode_mean(const Vector& x) const;
  Vector encode_sample(const Vector& x, Rng& rng) const;
  Vector decode(const Vector& z) const;

 private:
  Matrix enc_;
  double sigma_e_;
};

}  // namespace treg
