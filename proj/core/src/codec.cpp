#include "treg/codec.hpp"

#include "treg/errors.hpp"

namespace treg {

LatentCodec::LatentCodec(Matrix enc, double sigma_e) : enc_(std::move(enc)), sigma_e_(sigma_e) {
  if (enc_.rows() < 1 || enc_.rows() > enc_.cols())
    throw ConfigError("codec.d must satisfy 1 <= d <= m");
  if (!(sigma_e_ >= 0.0)) throw ConfigError("codec.sigma_e must be >= 0");
  const Matrix gram = enc_ * enc_.transpose();
  const double err = (gram - Matrix::Identity(enc_.rows(), enc_.rows())).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw ConfigError("codec encoder rows are not orthonormal");
}

LatentCodec LatentCodec::random(int pixels, int latent, std::uint64_t seed, double sigma_e) {
  if (pixels < 1) throw ConfigError("codec.m must be >= 1");
  if (latent < 1 || latent > pixels) throw ConfigError("codec.d must satisfy 1 <= d <= m");
  Rng rng(seed, 0xC0DEC);
  const Matrix gaussian = rng.normal_matrix(pixels, latent);
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix q = qr.householderQ() * Matrix::Identity(pixels, latent);
  return LatentCodec(q.transpose(), sigma_e);
}

Vector LatentCodec::encode_mean(const Vector& x) const {
  if (x.size() != pixels())
    throw ShapeError("encode: image has " + std::to_string(x.size()) + " pixels, codec expects " +
                     std::to_string(pixels()));
  return enc_ * x;
}

Vector LatentCodec::encode_sample(const Vector& x, Rng& rng) const {
  Vector z = encode_mean(x);
  if (sigma_e_ > 0.0) z += sigma_e_ * rng.normal_vector(latent());
  return z;
}

Vector LatentCodec::decode(const Vector& z) const {
  if (z.size() != latent())
    throw ShapeError("decode: latent has dimension " + std::to_string(z.size()) + ", codec expects " +
                     std::to_string(latent()));
  return enc_.transpose() * z;
}

}  // namespace treg
