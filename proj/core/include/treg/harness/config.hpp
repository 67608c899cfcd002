#pragma once

#include "treg/negation.hpp"
#include "treg/prior.hpp"
#include "treg/sampler.hpp"
#include "treg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace treg::harness {

// Flat "key = value" text. '#' starts a comment; blank lines are ignored;
// a repeated key is an error.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string source_;
};

struct OperatorSpec {
  std::string kind = "blur";  // blur | downsample | inpaint | phase
  int kernel_size = 7;
  double sigma = 1.5;
  int factor = 2;
  std::string mask;                    // PGM path, inpaint only
  std::optional<std::array<int, 4>> box;  // row0,col0,row1,col1 hole, inpaint only
  int pad = 16;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  int schedule_steps = 1000;
  double beta_start = 0.00085;
  double beta_end = 0.012;

  ImageShape image{32, 32};

  std::string prior_path;
  std::string prior_inline;
  NullMode null_mode = NullMode::EmbeddingWeighted;

  int latent_dim = 0;  // 0: same as the pixel count
  std::uint64_t codec_seed = 0;
  double sigma_e = 0.0;

  OperatorSpec op;

  double sigma0 = 0.1;
  std::optional<std::uint64_t> measurement_seed;
  std::string measurement_path;

  std::string truth_concept;
  int truth_component = -1;  // -1: draw by weight
  bool truth_sample = true;
  std::optional<std::uint64_t> truth_seed;

  std::optional<std::string> concept_label;  // solver.concept; NULL drops conditioning
  SolverConfig solver;
  std::string use_adam = "auto";  // auto | true | false
  std::optional<double> eta;      // custom stochasticity s_t = eta * beta_tilde(t)

  bool negation_enabled = true;
  NegationParams negation;

  std::string experiment_kind;
  int restarts = 10;
  std::string experiment_concept;
  int profile_row = -1;  // -1: middle row
};

RunConfig parse_run_config(const KeyValues& kv, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical text of every resolved field, loadable by parse_run_config.
std::string render(const RunConfig& cfg);

std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& path);

}  // namespace treg::harness
