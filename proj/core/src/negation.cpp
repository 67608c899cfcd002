#include "treg/negation.hpp"

#include "treg/errors.hpp"
#include "treg/rng.hpp"

#include <algorithm>
#include <cmath>

namespace treg {

void validate(const NegationParams& p) {
  if (p.dim < 1) throw ConfigError("negation.dim must be >= 1");
  if (!(p.kappa > 0.0)) throw ConfigError("negation.kappa must be > 0");
  if (!(p.lr >= 0.0)) throw ConfigError("negation.lr must be >= 0");
  if (!(p.norm_cap > 0.0)) throw ConfigError("negation.norm_cap must be > 0");
}

EmbeddingState::EmbeddingState(Matrix concept_embeddings, Matrix image_projection, double kappa, double lr,
                               double norm_cap)
    : concept_embeddings_(std::move(concept_embeddings)),
      image_projection_(std::move(image_projection)),
      kappa_(kappa),
      lr_(lr),
      norm_cap_(norm_cap),
      null_(Vector::Zero(image_projection_.rows())) {
  if (concept_embeddings_.cols() != image_projection_.rows())
    throw ConfigError("negation: concept embeddings and image projection disagree on dimension");
  if (!(kappa_ > 0.0)) throw ConfigError("negation.kappa must be > 0");
  if (!(lr_ >= 0.0)) throw ConfigError("negation.lr must be >= 0");
  if (!(norm_cap_ > 0.0)) throw ConfigError("negation.norm_cap must be > 0");
  for (Eigen::Index k = 0; k < concept_embeddings_.rows(); ++k)
    if (std::abs(concept_embeddings_.row(k).norm() - 1.0) > 1e-12)
      throw ConfigError("negation: concept embeddings must have unit norm");
}

EmbeddingState EmbeddingState::build(const ConceptPrior& prior, const LatentCodec& codec,
                                     const NegationParams& params) {
  validate(params);
  if (params.dim > codec.pixels()) throw ConfigError("negation.dim must not exceed the pixel count");
  Rng rng(params.seed, 0xE3BED);
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(codec.pixels(), params.dim));
  const Matrix proj = (qr.householderQ() * Matrix::Identity(codec.pixels(), params.dim)).transpose();

  Matrix emb(prior.num_concepts(), params.dim);
  for (int k = 0; k < prior.num_concepts(); ++k) {
    Vector e = proj * codec.decode(prior.concept_mean(k));
    if (e.norm() == 0.0) e = rng.normal_vector(params.dim);
    emb.row(k) = e.normalized().transpose();
  }
  EmbeddingState state(emb, proj, params.kappa, params.lr, params.norm_cap);
  if (params.init == NullInit::ConceptMean) {
    Vector c = emb.colwise().mean().transpose();
    if (c.norm() > params.norm_cap) c *= params.norm_cap / c.norm();
    state.set_null_embedding(std::move(c));
  }
  return state;
}

void EmbeddingState::set_null_embedding(Vector c) {
  if (c.size() != dim()) throw ShapeError("null embedding has the wrong dimension");
  null_ = std::move(c);
}

Vector EmbeddingState::embed_image(const Vector& x) const {
  if (x.size() != image_projection_.cols()) throw ShapeError("embed_image: image has the wrong size");
  Vector e = image_projection_ * x;
  const double n = e.norm();
  if (n == 0.0) return Vector::Zero(dim());
  return e / n;
}

double EmbeddingState::similarity(const Vector& x) const {
  // + 0.0 folds a -0.0 dot product into +0.0
  return embed_image(x).dot(null_) + 0.0;
}

const Vector& EmbeddingState::negate_step(const Vector& x_hat) {
  null_ = negation_update(null_, embed_image(x_hat), lr_, norm_cap_);
  return null_;
}

std::vector<double> EmbeddingState::null_weights() const {
  return softmax_weights(concept_embeddings_, null_, kappa_);
}

Vector negation_update(const Vector& c_null, const Vector& image_embedding, double lr, double norm_cap) {
  if (c_null.size() != image_embedding.size()) throw ShapeError("negation_update: dimension mismatch");
  Vector c = c_null - lr * image_embedding;
  const double n = c.norm();
  if (n > norm_cap) c *= norm_cap / n;
  return c;
}

std::vector<double> softmax_weights(const Matrix& embeddings, const Vector& c_null, double kappa) {
  const Vector logits = kappa * (embeddings * c_null);
  const double top = logits.maxCoeff();
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) total += (w[k] = std::exp(logits[k] - top));
  for (double& v : w) v /= total;
  return w;
}

}  // namespace treg
