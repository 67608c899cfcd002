#include "treg/harness/problem.hpp"

#include "treg/errors.hpp"
#include "treg/harness/io.hpp"
#include "treg/rng.hpp"

#include <cmath>
#include <limits>

namespace treg::harness {

namespace {

constexpr std::uint64_t kMeasurementSalt = 0x3EA5;
constexpr std::uint64_t kTruthSalt = 0x7A07;

struct Truth {
  Vector x;
  std::string label;
};

Truth draw_truth(const RunConfig& cfg, const ConceptPrior& prior, const LatentCodec& codec) {
  const int k = prior.index_of(cfg.truth_concept);
  const auto& comps = prior.concept_at(k).components;
  Rng rng(cfg.truth_seed.value_or(derive_seed(cfg.seed, kTruthSalt)), 0);
  int j = cfg.truth_component;
  if (j < 0) {
    double u = rng.uniform();
    j = static_cast<int>(comps.size()) - 1;
    for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
      if (u < comps[i].weight) {
        j = i;
        break;
      }
      u -= comps[i].weight;
    }
  } else if (j >= static_cast<int>(comps.size())) {
    throw ConfigError("truth.component is out of range for concept '" + cfg.truth_concept + "'");
  }
  Vector z = comps[j].mean;
  if (cfg.truth_sample) z += std::sqrt(comps[j].variance) * rng.normal_vector(z.size());
  return {codec.decode(z), cfg.truth_concept};
}

SolverConfig resolve_solver(const RunConfig& cfg, const NoiseSchedule& sched, const ForwardOperator& op) {
  SolverConfig s = cfg.solver;
  s.seed = cfg.seed;
  if (cfg.use_adam == "auto")
    s.use_adam = !op.is_linear();
  else
    s.use_adam = cfg.use_adam == "true";
  if (cfg.eta) {
    s.custom_noise.assign(sched.steps() + 1, 0.0);
    for (int t = 1; t <= sched.steps(); ++t) s.custom_noise[t] = *cfg.eta * sched.beta_tilde(t);
  }
  validate(s, sched);
  return s;
}

}  // namespace

ForwardOperator build_operator(const RunConfig& cfg) {
  const auto& o = cfg.op;
  if (o.kind == "blur") return ForwardOperator::gaussian_blur(cfg.image, o.kernel_size, o.sigma);
  if (o.kind == "downsample") return ForwardOperator::downsample(cfg.image, o.factor);
  if (o.kind == "phase") return ForwardOperator::phase_retrieval(cfg.image, o.pad);
  if (o.kind == "inpaint") {
    if (!o.mask.empty() && o.box) throw ConfigError("operator.mask and operator.box are mutually exclusive");
    if (!o.mask.empty()) return ForwardOperator::box_inpaint(cfg.image, read_mask(resolve_path(cfg, o.mask), cfg.image));
    if (o.box) {
      const auto& b = *o.box;
      return ForwardOperator::box_inpaint(cfg.image, box_mask(cfg.image, b[0], b[1], b[2], b[3]));
    }
    throw ConfigError("operator.kind = inpaint needs operator.mask or operator.box");
  }
  throw ConfigError("operator.kind: expected blur, downsample, inpaint or phase, got '" + o.kind + "'");
}

Problem build_problem(const RunConfig& cfg) {
  NoiseSchedule sched = make_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end);
  const int m = cfg.image.size();
  LatentCodec codec = LatentCodec::random(m, cfg.latent_dim == 0 ? m : cfg.latent_dim, cfg.codec_seed, cfg.sigma_e);
  ConceptPrior prior = cfg.prior_inline.empty()
                           ? load_prior_json(resolve_path(cfg, cfg.prior_path), codec, cfg.null_mode)
                           : parse_prior_json(cfg.prior_inline, codec, cfg.null_mode);
  ForwardOperator op = build_operator(cfg);
  if (cfg.concept_label) prior.index_of(*cfg.concept_label);
  if (!cfg.experiment_concept.empty()) prior.index_of(cfg.experiment_concept);

  std::optional<Vector> x_true;
  std::optional<std::string> truth_label;
  if (!cfg.truth_concept.empty()) {
    Truth t = draw_truth(cfg, prior, codec);
    x_true = std::move(t.x);
    truth_label = std::move(t.label);
  }

  Measurement meas;
  if (!cfg.measurement_path.empty()) {
    RawVector raw = read_raw(resolve_path(cfg, cfg.measurement_path));
    if (raw.values.size() != op.out_dim())
      throw ConfigError("measurement.path holds " + std::to_string(raw.values.size()) + " values, operator produces " +
                        std::to_string(op.out_dim()));
    meas = Measurement{std::move(raw.values), raw.sigma0, op.id(), raw.seed};
  } else if (x_true) {
    meas = simulate_measurement(op, *x_true, cfg.sigma0, cfg.measurement_seed.value_or(derive_seed(cfg.seed, kMeasurementSalt)));
  } else {
    throw ConfigError("either measurement.path or truth.concept is required");
  }

  std::optional<EmbeddingState> embedding;
  if (cfg.negation_enabled) embedding.emplace(EmbeddingState::build(prior, codec, cfg.negation));

  SolverConfig solver = resolve_solver(cfg, sched, op);
  return Problem{cfg,
                 std::move(sched),
                 std::move(codec),
                 std::move(prior),
                 std::move(op),
                 std::move(x_true),
                 std::move(truth_label),
                 std::move(meas),
                 std::move(embedding),
                 std::move(solver)};
}

int nearest_concept(const ConceptPrior& prior, const Vector& z) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < prior.num_concepts(); ++k)
    for (const auto& c : prior.concept_at(k).components) {
      const double d = (c.mean - z).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
  return best;
}

}  // namespace treg::harness
