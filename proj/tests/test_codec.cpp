#include "treg/codec.hpp"
#include "treg/errors.hpp"
#include "treg/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace treg;

TEST(Codec, RandomEncoderHasOrthonormalRows) {
  for (auto [m, d] : {std::pair{16, 16}, std::pair{64, 10}, std::pair{256, 256}, std::pair{2, 1}}) {
    const auto c = LatentCodec::random(m, d, 42);
    EXPECT_EQ(c.pixels(), m);
    EXPECT_EQ(c.latent(), d);
    const Matrix g = c.encoder() * c.encoder().transpose();
    EXPECT_LE((g - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Codec, DecodeIsIsometry) {
  const auto c = LatentCodec::random(64, 12, 3);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vector z = rng.normal_vector(12);
    EXPECT_NEAR(c.decode(z).norm(), z.norm(), 1e-12 * (1 + z.norm()));
    EXPECT_LE((c.encode_mean(c.decode(z)) - z).norm(), 1e-12 * (1 + z.norm()));
  }
}

TEST(Codec, FullRankRoundTrip) {
  const auto c = LatentCodec::random(36, 36, 8);
  Rng rng(2);
  const Vector x = rng.normal_vector(36);
  EXPECT_LE((c.decode(c.encode_mean(x)) - x).norm(), 1e-12 * x.norm());
}

TEST(Codec, ReducedRankProjects) {
  const auto c = LatentCodec::random(40, 7, 9);
  Rng rng(3);
  const Vector x = rng.normal_vector(40);
  const Vector p = c.decode(c.encode_mean(x));
  EXPECT_LE((c.decode(c.encode_mean(p)) - p).norm(), 1e-12 * x.norm());
  EXPECT_NEAR((x - p).dot(p), 0.0, 1e-12 * x.squaredNorm());
  EXPECT_LE(p.norm(), x.norm() + 1e-12);
}

TEST(Codec, NoiselessSampleEqualsMean) {
  const auto c = LatentCodec::random(20, 5, 4, 0.0);
  Rng rng(5);
  const Vector x = rng.normal_vector(20);
  EXPECT_EQ(c.encode_sample(x, rng), c.encode_mean(x));
}

TEST(Codec, SeedReproducible) {
  EXPECT_EQ(LatentCodec::random(30, 6, 77).encoder(), LatentCodec::random(30, 6, 77).encoder());
  EXPECT_NE(LatentCodec::random(30, 6, 77).encoder(), LatentCodec::random(30, 6, 78).encoder());
}

TEST(Codec, EncoderNoiseStd) {
  const double sigma = 0.3;
  const auto c = LatentCodec::random(8, 4, 6, sigma);
  Rng rng(7);
  const Vector x = Vector::LinSpaced(8, -1, 1);
  const Vector mean = c.encode_mean(x);
  const int n = 100000;
  double sq = 0;
  for (int i = 0; i < n; ++i) sq += (c.encode_sample(x, rng) - mean).squaredNorm();
  const double est = std::sqrt(sq / (static_cast<double>(n) * 4));
  EXPECT_NEAR(est, sigma, 0.02 * sigma);
}

TEST(Codec, ShapeErrors) {
  const auto c = LatentCodec::random(16, 4, 1);
  EXPECT_THROW(c.encode_mean(Vector::Zero(15)), ShapeError);
  EXPECT_THROW(c.decode(Vector::Zero(5)), ShapeError);
}

TEST(Codec, ConfigErrors) {
  EXPECT_THROW(LatentCodec::random(16, 17, 1), ConfigError);
  EXPECT_THROW(LatentCodec::random(16, 0, 1), ConfigError);
  EXPECT_THROW(LatentCodec::random(0, 0, 1), ConfigError);
  EXPECT_THROW(LatentCodec::random(16, 4, 1, -0.1), ConfigError);
  Matrix bad = Matrix::Identity(2, 3);
  bad(0, 1) = 0.1;
  EXPECT_THROW(LatentCodec(bad, 0.0), ConfigError);
  EXPECT_NO_THROW(LatentCodec(Matrix::Identity(2, 3), 0.0));
}
