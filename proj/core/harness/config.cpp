#include "treg/harness/config.hpp"

#include "treg/errors.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace treg::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Typed access to a KeyValues map that remembers which keys were read.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto it = kv_.entries().find(key);
    if (it == kv_.entries().end()) return std::nullopt;
    return it->second;
  }

  void str(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (auto v = raw(key)) out = parse_int<Int>(key, *v);
  }

  template <class Int>
  void integer(const std::string& key, std::optional<Int>& out) {
    if (auto v = raw(key)) out = parse_int<Int>(key, *v);
  }

  void real(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_real(key, *v);
  }

  void real(const std::string& key, std::optional<double>& out) {
    if (auto v = raw(key)) out = parse_real(key, *v);
  }

  void boolean(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "on")
        out = true;
      else if (*v == "false" || *v == "0" || *v == "off")
        out = false;
      else
        throw ConfigError(key + ": expected true or false, got '" + *v + "'");
    }
  }

  template <class Enum>
  void choice(const std::string& key, Enum& out, std::initializer_list<std::pair<const char*, Enum>> options) {
    auto v = raw(key);
    if (!v) return;
    std::string names;
    for (const auto& [name, value] : options) {
      if (*v == name) {
        out = value;
        return;
      }
      names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(key + ": expected one of " + names + ", got '" + *v + "'");
  }

  double parse_real(const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
  }

  template <class Int>
  Int parse_int(const std::string& key, const std::string& v) const {
    Int out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv_.entries())
      if (!used_.count(key)) throw ConfigError("unknown configuration key '" + key + "' in " + kv_.source());
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.entries_.emplace(key, value).second)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

RunConfig parse_run_config(const KeyValues& kv, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  Reader r(kv);

  r.integer("seed", c.seed);
  r.str("output_dir", c.output_dir);

  r.integer("schedule.T", c.schedule_steps);
  r.real("schedule.beta_start", c.beta_start);
  r.real("schedule.beta_end", c.beta_end);

  r.integer("image.height", c.image.height);
  r.integer("image.width", c.image.width);

  r.str("prior.path", c.prior_path);
  r.str("prior.inline", c.prior_inline);
  r.choice("prior.null_mode", c.null_mode,
           {{"embedding", NullMode::EmbeddingWeighted}, {"uniform", NullMode::UniformMarginal}});

  r.integer("codec.latent_dim", c.latent_dim);
  r.integer("codec.seed", c.codec_seed);
  r.real("codec.sigma_e", c.sigma_e);

  r.str("operator.kind", c.op.kind);
  r.integer("operator.kernel_size", c.op.kernel_size);
  r.real("operator.sigma", c.op.sigma);
  r.integer("operator.factor", c.op.factor);
  r.str("operator.mask", c.op.mask);
  if (auto box = r.raw("operator.box")) {
    const auto parts = split(*box, ',');
    if (parts.size() != 4) throw ConfigError("operator.box: expected row0,col0,row1,col1");
    std::array<int, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = r.parse_int<int>("operator.box", parts[i]);
    c.op.box = b;
  }
  r.integer("operator.pad", c.op.pad);

  r.real("measurement.sigma0", c.sigma0);
  r.integer("measurement.seed", c.measurement_seed);
  r.str("measurement.path", c.measurement_path);

  r.str("truth.concept", c.truth_concept);
  r.integer("truth.component", c.truth_component);
  r.boolean("truth.sample", c.truth_sample);
  r.integer("truth.seed", c.truth_seed);

  if (auto v = r.raw("solver.concept")) {
    if (*v == "NULL" || v->empty())
      c.concept_label.reset();
    else
      c.concept_label = *v;
  }
  SolverConfig& s = c.solver;
  r.integer("solver.nfe", s.nfe);
  r.real("solver.omega1", s.omega1);
  r.real("solver.omega2", s.omega2);
  r.integer("solver.gamma_mod", s.gamma_mod);
  r.integer("solver.gamma_tmax", s.gamma_tmax);
  r.real("solver.cg.lambda", s.cg.lambda);
  r.integer("solver.cg.iters", s.cg.iters);
  r.real("solver.cg.tol", s.cg.tol);
  r.real("solver.adam.lr", s.adam.lr);
  r.real("solver.adam.beta1", s.adam.beta1);
  r.real("solver.adam.beta2", s.adam.beta2);
  r.integer("solver.adam.iters", s.adam.iters);
  r.real("solver.adam.lambda", s.adam.lambda);
  r.real("solver.adam.epsilon", s.adam.epsilon);
  r.str("solver.use_adam", c.use_adam);
  if (c.use_adam != "auto" && c.use_adam != "true" && c.use_adam != "false")
    throw ConfigError("solver.use_adam: expected auto, true or false, got '" + c.use_adam + "'");
  r.choice("solver.stochasticity", s.stochasticity,
           {{"default", Stochasticity::Default},
            {"deterministic", Stochasticity::Deterministic},
            {"custom", Stochasticity::Custom}});
  if (auto v = r.raw("solver.stochasticity_values")) {
    s.custom_noise.clear();
    for (const auto& part : split(*v, ',')) s.custom_noise.push_back(r.parse_real("solver.stochasticity_values", part));
  }
  r.real("solver.eta", c.eta);
  r.choice("solver.plain_step", s.plain_step,
           {{"deterministic", PlainStep::Deterministic}, {"total_noise", PlainStep::TotalNoise}});
  r.boolean("solver.dps", s.dps_enabled);
  r.real("solver.dps_scale", s.dps_scale);
  r.choice("solver.dps_loss", s.dps_loss, {{"squared", DpsLoss::Squared}, {"norm", DpsLoss::Norm}});
  r.choice("solver.rho_rule", s.rho_rule, {{"sqrt_alpha_bar_prev", RhoRule::SqrtAlphaBarPrev}});

  r.boolean("negation.enabled", c.negation_enabled);
  r.real("negation.lr", c.negation.lr);
  r.integer("negation.dim", c.negation.dim);
  r.real("negation.kappa", c.negation.kappa);
  r.integer("negation.seed", c.negation.seed);
  r.real("negation.norm_cap", c.negation.norm_cap);
  r.choice("negation.init", c.negation.init, {{"zero", NullInit::Zero}, {"concept_mean", NullInit::ConceptMean}});

  r.str("experiment.kind", c.experiment_kind);
  r.integer("experiment.restarts", c.restarts);
  r.str("experiment.concept", c.experiment_concept);
  r.integer("experiment.profile_row", c.profile_row);

  r.reject_unknown();

  if (c.schedule_steps < 1) throw ConfigError("schedule.T must be >= 1");
  if (c.image.height < 1 || c.image.width < 1) throw ConfigError("image.height and image.width must be >= 1");
  if (c.latent_dim < 0) throw ConfigError("codec.latent_dim must be >= 0");
  if (c.restarts < 1) throw ConfigError("experiment.restarts must be >= 1");
  if (!(c.sigma0 >= 0.0)) throw ConfigError("measurement.sigma0 must be >= 0");
  if (c.prior_path.empty() && c.prior_inline.empty()) throw ConfigError("prior.path or prior.inline is required");
  if (!c.prior_path.empty() && !c.prior_inline.empty())
    throw ConfigError("prior.path and prior.inline are mutually exclusive");
  if (c.eta && s.stochasticity != Stochasticity::Custom)
    throw ConfigError("solver.eta requires solver.stochasticity = custom");
  if (c.eta && !s.custom_noise.empty())
    throw ConfigError("solver.eta and solver.stochasticity_values are mutually exclusive");
  for (const std::string* p : {&c.prior_path, &c.op.mask, &c.measurement_path}) {
    if (p->empty()) continue;
    const auto full = resolve_path(c, *p);
    if (!std::ifstream(full)) throw ConfigError("cannot read " + full.string());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(KeyValues::load(path), path.parent_path());
}

std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : cfg.base_dir / p;
}

std::string render(const RunConfig& c) {
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
  auto opt_int = [&](const std::string& k, const std::optional<std::uint64_t>& v) {
    if (v) kv(k, std::to_string(*v));
  };
  const SolverConfig& s = c.solver;
  kv("seed", std::to_string(c.seed));
  kv("output_dir", c.output_dir);
  kv("schedule.T", std::to_string(c.schedule_steps));
  kv("schedule.beta_start", fmt(c.beta_start));
  kv("schedule.beta_end", fmt(c.beta_end));
  kv("image.height", std::to_string(c.image.height));
  kv("image.width", std::to_string(c.image.width));
  if (!c.prior_path.empty()) kv("prior.path", c.prior_path);
  if (!c.prior_inline.empty()) kv("prior.inline", c.prior_inline);
  kv("prior.null_mode", c.null_mode == NullMode::EmbeddingWeighted ? "embedding" : "uniform");
  kv("codec.latent_dim", std::to_string(c.latent_dim));
  kv("codec.seed", std::to_string(c.codec_seed));
  kv("codec.sigma_e", fmt(c.sigma_e));
  kv("operator.kind", c.op.kind);
  kv("operator.kernel_size", std::to_string(c.op.kernel_size));
  kv("operator.sigma", fmt(c.op.sigma));
  kv("operator.factor", std::to_string(c.op.factor));
  if (!c.op.mask.empty()) kv("operator.mask", c.op.mask);
  if (c.op.box)
    kv("operator.box", std::to_string((*c.op.box)[0]) + "," + std::to_string((*c.op.box)[1]) + "," +
                           std::to_string((*c.op.box)[2]) + "," + std::to_string((*c.op.box)[3]));
  kv("operator.pad", std::to_string(c.op.pad));
  kv("measurement.sigma0", fmt(c.sigma0));
  opt_int("measurement.seed", c.measurement_seed);
  if (!c.measurement_path.empty()) kv("measurement.path", c.measurement_path);
  if (!c.truth_concept.empty()) kv("truth.concept", c.truth_concept);
  kv("truth.component", std::to_string(c.truth_component));
  kv("truth.sample", c.truth_sample ? "true" : "false");
  opt_int("truth.seed", c.truth_seed);
  kv("solver.concept", c.concept_label ? *c.concept_label : "NULL");
  kv("solver.nfe", std::to_string(s.nfe));
  kv("solver.omega1", fmt(s.omega1));
  kv("solver.omega2", fmt(s.omega2));
  kv("solver.gamma_mod", std::to_string(s.gamma_mod));
  kv("solver.gamma_tmax", std::to_string(s.gamma_tmax));
  kv("solver.cg.lambda", fmt(s.cg.lambda));
  kv("solver.cg.iters", std::to_string(s.cg.iters));
  kv("solver.cg.tol", fmt(s.cg.tol));
  kv("solver.adam.lr", fmt(s.adam.lr));
  kv("solver.adam.beta1", fmt(s.adam.beta1));
  kv("solver.adam.beta2", fmt(s.adam.beta2));
  kv("solver.adam.iters", std::to_string(s.adam.iters));
  kv("solver.adam.lambda", fmt(s.adam.lambda));
  kv("solver.adam.epsilon", fmt(s.adam.epsilon));
  kv("solver.use_adam", c.use_adam);
  kv("solver.stochasticity", s.stochasticity == Stochasticity::Default         ? "default"
                             : s.stochasticity == Stochasticity::Deterministic ? "deterministic"
                                                                               : "custom");
  if (!s.custom_noise.empty()) {
    std::string v;
    for (double x : s.custom_noise) v += (v.empty() ? "" : ",") + fmt(x);
    kv("solver.stochasticity_values", v);
  }
  if (c.eta) kv("solver.eta", fmt(*c.eta));
  kv("solver.plain_step", s.plain_step == PlainStep::Deterministic ? "deterministic" : "total_noise");
  kv("solver.dps", s.dps_enabled ? "true" : "false");
  kv("solver.dps_scale", fmt(s.dps_scale));
  kv("solver.dps_loss", s.dps_loss == DpsLoss::Squared ? "squared" : "norm");
  kv("solver.rho_rule", "sqrt_alpha_bar_prev");
  kv("negation.enabled", c.negation_enabled ? "true" : "false");
  kv("negation.lr", fmt(c.negation.lr));
  kv("negation.dim", std::to_string(c.negation.dim));
  kv("negation.kappa", fmt(c.negation.kappa));
  kv("negation.seed", std::to_string(c.negation.seed));
  kv("negation.norm_cap", fmt(c.negation.norm_cap));
  kv("negation.init", c.negation.init == NullInit::Zero ? "zero" : "concept_mean");
  if (!c.experiment_kind.empty()) kv("experiment.kind", c.experiment_kind);
  kv("experiment.restarts", std::to_string(c.restarts));
  if (!c.experiment_concept.empty()) kv("experiment.concept", c.experiment_concept);
  kv("experiment.profile_row", std::to_string(c.profile_row));
  return o.str();
}

}  // namespace treg::harness
