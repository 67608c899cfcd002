#pragma once

#include "treg/codec.hpp"
#include "treg/prior.hpp"
#include "treg/types.hpp"

#include <cstdint>
#include <vector>

namespace treg {

enum class NullInit {
  Zero,         // uniform null weights until the first update
  ConceptMean,  // mean of the concept embeddings, norm-capped
};

struct NegationParams {
  int dim = 16;           // embedding dimension q
  double kappa = 1.0;     // softmax temperature of the null coupling
  double lr = 0.02;       // step size on the null embedding
  double norm_cap = 10.0; // ||c_null|| is projected back onto this ball
  std::uint64_t seed = 0;
  NullInit init = NullInit::Zero;
};

void validate(const NegationParams& p);

// Toy joint embedding space for adaptive negation. The image embedder is a
// fixed linear map with orthonormal rows followed by normalisation; concept k
// embeds as the image embedding of its mean image. c_null starts at the
// origin, where the null coupling is exactly the uniform marginal.
class EmbeddingState {
 public:
  EmbeddingState(Matrix concept_embeddings, Matrix image_projection, double kappa, double lr,
                 double norm_cap);

  static EmbeddingState build(const ConceptPrior& prior, const LatentCodec& codec,
                              const NegationParams& params);

  int dim() const { return static_cast<int>(image_projection_.rows()); }
  int num_concepts() const { return static_cast<int>(concept_embeddings_.rows()); }
  double kappa() const { return kappa_; }
  double lr() const { return lr_; }
  double norm_cap() const { return norm_cap_; }
  const Matrix& concept_embeddings() const { return concept_embeddings_; }

  const Vector& null_embedding() const { return null_; }
  void set_null_embedding(Vector c);

  // normalize(P x); the zero vector when P x == 0.
  Vector embed_image(const Vector& x) const;
  // <embed_image(x), c_null>
  double similarity(const Vector& x) const;
  // c_null <- cap(c_null - lr * embed_image(x_hat)); returns the new c_null.
  const Vector& negate_step(const Vector& x_hat);
  // softmax_k(kappa <c_null, e_k>)
  std::vector<double> null_weights() const;

 private:
  Matrix concept_embeddings_;  // K x q, unit rows
  Matrix image_projection_;    // q x m, orthonormal rows
  double kappa_;
  double lr_;
  double norm_cap_;
  Vector null_;
};

// One gradient step of <e, c> in c, then projection onto ||c|| <= cap.
Vector negation_update(const Vector& c_null, const Vector& image_embedding, double lr, double norm_cap);

// softmax over kappa <c_null, e_k> for the rows e_k of embeddings.
std::vector<double> softmax_weights(const Matrix& embeddings, const Vector& c_null, double kappa);

}  // namespace treg
