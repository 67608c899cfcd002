#include "treg/harness/io.hpp"

#include "treg/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace treg::harness {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Whitespace-separated PGM header token, skipping comments. A "treg-range"
// comment is copied into range_comment.
std::string pgm_token(const std::string& s, std::size_t& pos, std::string* range_comment) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      const auto end = s.find('\n', pos);
      const std::string c = s.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1);
      if (range_comment && c.find("treg-range") != std::string::npos) *range_comment = c;
      pos = end == std::string::npos ? s.size() : end + 1;
    } else {
      break;
    }
  }
  const auto start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '#') ++pos;
  return s.substr(start, pos - start);
}

int to_int(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_raw(const std::filesystem::path& path, const RawVector& data) {
  auto out = open_out(path);
  out << "TREGV1 n=" << data.values.size() << " sigma0=" << format_real(data.sigma0) << " seed=" << data.seed << '\n';
  std::vector<char> bytes(8 * data.values.size());
  for (Eigen::Index i = 0; i < data.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(data.values[i]);
    for (int b = 0; b < 8; ++b) bytes[8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RawVector read_raw(const std::filesystem::path& path) {
  const std::string s = slurp(path);
  const auto nl = s.find('\n');
  if (nl == std::string::npos) throw IoError(path.string() + ": missing TREGV1 header");
  std::istringstream header(s.substr(0, nl));
  std::string magic, n_tok, sigma_tok, seed_tok;
  header >> magic >> n_tok >> sigma_tok >> seed_tok;
  if (magic != "TREGV1" || n_tok.rfind("n=", 0) != 0 || sigma_tok.rfind("sigma0=", 0) != 0 ||
      seed_tok.rfind("seed=", 0) != 0)
    throw IoError(path.string() + ": malformed TREGV1 header");
  RawVector out;
  std::size_t n = 0;
  try {
    n = std::stoull(n_tok.substr(2));
    out.sigma0 = std::stod(sigma_tok.substr(7));
    out.seed = std::stoull(seed_tok.substr(5));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed TREGV1 header");
  }
  if (s.size() - nl - 1 != 8 * n) throw IoError(path.string() + ": payload size does not match n");
  out.values.resize(static_cast<Eigen::Index>(n));
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + nl + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[8 * i + b]) << (8 * b);
    out.values[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.values.size() != image.shape.size()) throw ShapeError("write_pgm: values do not match the shape");
  if (!image.values.allFinite()) throw IoError("write_pgm: image has non-finite values");
  double lo = image.values.minCoeff();
  double hi = image.values.maxCoeff();
  if (hi == lo) hi = lo + 1.0;
  auto out = open_out(path);
  out << "P5\n# treg-range " << format_real(lo) << ' ' << format_real(hi) << '\n'
      << image.shape.width << ' ' << image.shape.height << "\n65535\n";
  std::vector<char> bytes(2 * image.values.size());
  for (Eigen::Index i = 0; i < image.values.size(); ++i) {
    const double u = (image.values[i] - lo) / (hi - lo);
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
    bytes[2 * i] = static_cast<char>(q >> 8);
    bytes[2 * i + 1] = static_cast<char>(q & 0xff);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string s = slurp(path);
  std::size_t pos = 0;
  std::string range;
  const std::string magic = pgm_token(s, pos, &range);
  if (magic != "P5" && magic != "P2") throw IoError(path.string() + ": not a PGM file");
  const int w = to_int(pgm_token(s, pos, &range), path);
  const int h = to_int(pgm_token(s, pos, &range), path);
  const int maxval = to_int(pgm_token(s, pos, &range), path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw IoError(path.string() + ": malformed PGM header");

  GrayImage img{{h, w}, Vector(static_cast<Eigen::Index>(w) * h)};
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    const int bpp = maxval > 255 ? 2 : 1;
    if (s.size() < pos + static_cast<std::size_t>(bpp) * img.values.size())
      throw IoError(path.string() + ": truncated PGM data");
    const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (Eigen::Index i = 0; i < img.values.size(); ++i)
      img.values[i] = bpp == 2 ? (p[2 * i] << 8 | p[2 * i + 1]) : p[i];
  } else {
    for (Eigen::Index i = 0; i < img.values.size(); ++i) {
      const std::string tok = pgm_token(s, pos, nullptr);
      if (tok.empty()) throw IoError(path.string() + ": truncated PGM data");
      img.values[i] = to_int(tok, path);
    }
  }
  double lo = 0.0;
  double hi = 1.0;
  if (!range.empty()) {
    std::istringstream in(range);
    std::string tag, a, b;
    in >> tag >> a >> b;
    try {
      lo = std::stod(a);
      hi = std::stod(b);
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed treg-range comment");
    }
  }
  img.values = (lo + (img.values.array() / maxval) * (hi - lo)).matrix();
  return img;
}

std::vector<std::uint8_t> read_mask(const std::filesystem::path& path, ImageShape expected) {
  GrayImage img = read_pgm(path);
  if (!(img.shape == expected))
    throw ConfigError("operator.mask: " + path.string() + " is " + img.shape.str() + ", image is " + expected.str());
  std::vector<std::uint8_t> mask(img.values.size());
  for (Eigen::Index i = 0; i < img.values.size(); ++i) mask[i] = img.values[i] != 0.0 ? 1 : 0;
  return mask;
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  auto out = open_out(path);
  out << "t,branch,data_consistency,dsm_loss,null_similarity\n";
  for (const auto& r : trace.steps)
    out << r.t << ',' << to_string(r.branch) << ',' << format_real(r.data_consistency) << ','
        << format_real(r.dsm_loss) << ',' << format_real(r.null_similarity) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

RunTrace read_trace_csv(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,branch,data_consistency,dsm_loss,null_similarity", 0) != 0)
    throw IoError(path.string() + ": unexpected trace header");
  RunTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[5];
    for (auto& x : f)
      if (!std::getline(row, x, ',')) throw IoError(path.string() + ": short trace row");
    StepRecord r;
    try {
      r.t = std::stoi(f[0]);
      r.data_consistency = std::stod(f[2]);
      r.dsm_loss = std::stod(f[3]);
      r.null_similarity = std::stod(f[4]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed trace row");
    }
    if (f[1] == "gamma")
      r.branch = Branch::Gamma;
    else if (f[1] == "plain")
      r.branch = Branch::Plain;
    else if (f[1] == "dps")
      r.branch = Branch::Dps;
    else
      throw IoError(path.string() + ": unknown branch '" + f[1] + "'");
    if (!trace.steps.empty()) trace.steps.back().t_prev = r.t;
    trace.steps.push_back(r);
  }
  return trace;
}

ConceptPrior parse_prior_json(const std::string& text, const LatentCodec& codec, NullMode mode) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("prior: invalid JSON: ") + e.what());
  }
  try {
    const std::string space = doc.value("space", std::string("latent"));
    if (space != "latent" && space != "pixel") throw ConfigError("prior.space must be latent or pixel");
    const int d = doc.at("d").get<int>();
    const int expect = space == "latent" ? codec.latent() : codec.pixels();
    if (d != expect)
      throw ConfigError("prior.d is " + std::to_string(d) + " but the " + space + " dimension is " +
                        std::to_string(expect));
    std::vector<Concept> concepts;
    for (const auto& c : doc.at("concepts")) {
      Concept con;
      con.label = c.at("label").get<std::string>();
      for (const auto& g : c.at("components")) {
        GaussianComponent comp;
        comp.weight = g.at("w").get<double>();
        comp.variance = g.at("var").get<double>();
        const auto mean = g.at("mean").get<std::vector<double>>();
        if (static_cast<int>(mean.size()) != d)
          throw ConfigError("prior: component of '" + con.label + "' has a mean of the wrong length");
        comp.mean = Eigen::Map<const Vector>(mean.data(), d);
        if (space == "pixel") comp.mean = codec.encode_mean(comp.mean);
        con.components.push_back(std::move(comp));
      }
      concepts.push_back(std::move(con));
    }
    return ConceptPrior(codec.latent(), std::move(concepts), mode);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
}

ConceptPrior load_prior_json(const std::filesystem::path& path, const LatentCodec& codec, NullMode mode) {
  std::string text;
  try {
    text = slurp(path);
  } catch (const IoError&) {
    throw ConfigError("prior.path: cannot read " + path.string());
  }
  return parse_prior_json(text, codec, mode);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace treg::harness
