#pragma once

#include "treg/codec.hpp"
#include "treg/harness/config.hpp"
#include "treg/negation.hpp"
#include "treg/operators.hpp"
#include "treg/prior.hpp"
#include "treg/sampler.hpp"
#include "treg/schedule.hpp"

#include <optional>
#include <string>

namespace treg::harness {

// Everything a run config resolves to. Immutable once built; restarts share it.
struct Problem {
  RunConfig config;
  NoiseSchedule schedule;
  LatentCodec codec;
  ConceptPrior prior;
  ForwardOperator op;
  std::optional<Vector> x_true;
  std::optional<std::string> truth_concept;
  Measurement measurement;
  std::optional<EmbeddingState> embedding;  // empty when negation.enabled = false
  SolverConfig solver;                       // resolved: use_adam, custom noise

  SamplerInputs inputs() const {
    return SamplerInputs{schedule, prior, codec, op, measurement, embedding ? &*embedding : nullptr};
  }
};

Problem build_problem(const RunConfig& cfg);

ForwardOperator build_operator(const RunConfig& cfg);

// Index of the concept whose component mean is nearest to z in latent space.
int nearest_concept(const ConceptPrior& prior, const Vector& z);

}  // namespace treg::harness
