// Regenerates the prior and mask files under fixtures/. Output is
// deterministic; rerunning it must leave the tree unchanged.

#include "treg/harness/io.hpp"
#include "treg/types.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using treg::ImageShape;
using treg::Vector;
using treg::harness::format_real;

namespace {

struct Blob {
  double row, col, sigma, amplitude;
};

Vector blobs(ImageShape s, const std::vector<Blob>& bs) {
  Vector img = Vector::Zero(s.size());
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c)
      for (const auto& b : bs) {
        const double d2 = (r - b.row) * (r - b.row) + (c - b.col) * (c - b.col);
        img[r * s.width + c] += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
  return img;
}

Vector checkerboard(ImageShape s) {
  Vector h(s.size());
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c) h[r * s.width + c] = (r + c) % 2 == 0 ? 1.0 : -1.0;
  return h;
}

struct Component {
  double w;
  Vector mean;
  double var;
};

struct ConceptSpec {
  std::string label;
  std::vector<Component> components;
};

void write_prior(const fs::path& path, int d, const std::vector<ConceptSpec>& concepts) {
  std::string s = "{\n  \"d\": " + std::to_string(d) + ",\n  \"space\": \"pixel\",\n  \"concepts\": [\n";
  for (std::size_t k = 0; k < concepts.size(); ++k) {
    s += "    {\"label\": \"" + concepts[k].label + "\", \"components\": [\n";
    const auto& cs = concepts[k].components;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      s += "      {\"w\": " + format_real(cs[i].w) + ", \"var\": " + format_real(cs[i].var) + ", \"mean\": [";
      for (Eigen::Index j = 0; j < cs[i].mean.size(); ++j)
        s += (j ? "," : "") + format_real(cs[i].mean[j]);
      s += "]}";
      s += i + 1 < cs.size() ? ",\n" : "\n";
    }
    s += "    ]}";
    s += k + 1 < concepts.size() ? ",\n" : "\n";
  }
  s += "  ]\n}\n";
  treg::harness::write_text(path, s);
}

void write_mask(const fs::path& path, ImageShape s, int r0, int c0, int r1, int c1) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << s.width << ' ' << s.height << "\n255\n";
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c) out.put(r >= r0 && r < r1 && c >= c0 && c < c1 ? '\0' : '\xff');
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures");
  const ImageShape s{16, 16};

  // blur2: two concepts sharing three smooth bases, told apart only by the
  // sign of a checkerboard the blur removes.
  {
    const std::vector<Vector> bases = {blobs(s, {{4.0, 4.0, 2.5, 3.0}}), blobs(s, {{11.0, 5.0, 2.5, 3.0}}),
                                       blobs(s, {{7.0, 12.0, 2.5, 3.0}})};
    const Vector h = checkerboard(s);
    ConceptSpec a{"A", {}}, b{"B", {}};
    for (const auto& base : bases) {
      a.components.push_back({1.0 / 3.0, base + h, 0.05});
      b.components.push_back({1.0 / 3.0, base - h, 0.05});
    }
    a.components.back().w = 1.0 - 2.0 / 3.0;
    b.components.back().w = 1.0 - 2.0 / 3.0;
    write_prior(root / "blur2" / "prior.json", s.size(), {a, b});
  }

  // phase2: an asymmetric target and its 180-degree rotation.
  {
    const Vector target = blobs(s, {{4.0, 5.0, 1.5, 2.0}, {10.0, 11.0, 2.0, 1.0}, {12.0, 4.0, 1.2, 1.5}});
    write_prior(root / "phase2" / "prior.json", s.size(),
                {{"upright", {{1.0, target, 0.01}}}, {"flipped", {{1.0, treg::flip180(target), 0.01}}}});
  }

  write_mask(root / "inpaint" / "mask.pgm", s, 5, 5, 11, 11);
  std::printf("fixtures written under %s\n", root.string().c_str());
  return 0;
}
