#pragma once

#include "treg/codec.hpp"
#include "treg/prior.hpp"
#include "treg/sampler.hpp"
#include "treg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace treg::harness {

// "%.17g", with inf/nan spelled out.
std::string format_real(double v);

// Flat little-endian float64 with the header line
// "TREGV1 n=<n> sigma0=<v> seed=<s>\n".
struct RawVector {
  Vector values;
  double sigma0 = 0.0;
  std::uint64_t seed = 0;
};
void write_raw(const std::filesystem::path& path, const RawVector& data);
RawVector read_raw(const std::filesystem::path& path);

// 16-bit binary PGM. The value range is stored in a "# treg-range lo hi"
// comment so that read_pgm maps samples back to the original scale; files
// without it read as sample / maxval.
struct GrayImage {
  ImageShape shape;
  Vector values;  // row-major
};
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
// Any non-zero sample is 1.
std::vector<std::uint8_t> read_mask(const std::filesystem::path& path, ImageShape expected);

// Columns t, branch, data_consistency, dsm_loss, null_similarity.
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::filesystem::path& path);

// {"d": int, "space": "latent" | "pixel", "concepts": [{"label": str,
//  "components": [{"w": real, "mean": [...], "var": real}]}]}
// Pixel-space means are mapped through the codec encoder.
ConceptPrior parse_prior_json(const std::string& text, const LatentCodec& codec, NullMode mode);
ConceptPrior load_prior_json(const std::filesystem::path& path, const LatentCodec& codec, NullMode mode);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace treg::harness
