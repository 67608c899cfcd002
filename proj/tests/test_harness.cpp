#include "treg/errors.hpp"
#include "treg/harness/cli.hpp"
#include "treg/harness/config.hpp"
#include "treg/harness/experiments.hpp"
#include "treg/harness/io.hpp"
#include "treg/harness/metrics.hpp"
#include "treg/harness/problem.hpp"
#include "treg/rng.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace treg;
using namespace treg::harness;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = TREG_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("treg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "treg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST(Metrics, Psnr) {
  const Vector x = Vector::LinSpaced(10, 0, 1);
  EXPECT_EQ(psnr(x, x, 1.0), std::numeric_limits<double>::infinity());
  const Vector off = x.array() + 0.1;
  EXPECT_NEAR(psnr(off, x, 1.0), 20.0, 1e-12);
  EXPECT_NEAR(psnr(off, x, 2.0) - psnr(off, x, 1.0), 20 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(psnr(off, x, 2.0) - psnr(off, x, 1.0), 6.0206, 1e-4);
  EXPECT_THROW(psnr(x, Vector::Zero(3), 1.0), ShapeError);
}

TEST(Metrics, YMse) {
  const auto op = ForwardOperator::downsample(ImageShape{4, 4}, 2);
  Rng rng(1);
  const Vector x = rng.normal_vector(16);
  const Vector y = op.apply(x);
  EXPECT_EQ(y_mse(op, x, y), 0.0);
  const Vector shifted = y.array() + 0.3;
  EXPECT_NEAR(y_mse(op, x, shifted), 0.09, 1e-15);
}

TEST(Metrics, YMseMatchesFinalTraceEntry) {
  const auto problem = build_problem(load_run_config(kFixtures / "blur2" / "solve.cfg"));
  const auto result = run(problem.solver, problem.inputs(), problem.config.concept_label);
  const auto& last = result.trace.steps.back();
  ASSERT_EQ(last.t_prev, 0);
  ASSERT_EQ(last.branch, Branch::Plain);
  const double n = static_cast<double>(problem.measurement.y.size());
  EXPECT_NEAR(y_mse(problem.op, result.x_final, problem.measurement.y), last.data_consistency / n,
              1e-12 * last.data_consistency / n);
}

TEST(Metrics, PixelVariance) {
  const ImageShape shape{2, 2};
  const Vector a = Vector::Constant(4, 0.7);
  const auto same = pixel_variance({a, a, a}, shape, 0);
  EXPECT_EQ(same.variance, Vector::Zero(4));
  EXPECT_EQ(same.mean, 0.0);
  Vector b = a;
  b[2] = 1.0;
  Vector c = a;
  c[2] = 0.0;
  const auto v = pixel_variance({b, c}, shape, 1);
  EXPECT_NEAR(v.variance[2], 0.5, 1e-15);
  EXPECT_EQ(v.variance[0], 0.0);
  EXPECT_NEAR(v.profile[0], 0.5, 1e-15);
  EXPECT_NEAR(v.mean, 0.125, 1e-15);
  EXPECT_THROW(pixel_variance({a}, shape, 0), ContractViolation);
  EXPECT_EQ(ExperimentOptions{}.restarts, 10);
  EXPECT_EQ(RunConfig{}.restarts, 10);
}

TEST(Config, ParseAndRender) {
  const auto kv = KeyValues::parse("seed = 12\n# comment\nprior.path = prior.json\nsolver.nfe = 40\nsolver.concept = NULL\n");
  const auto cfg = parse_run_config(kv, kFixtures / "gmm2d");
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.solver.nfe, 40);
  EXPECT_FALSE(cfg.concept_label);
  const auto again = parse_run_config(KeyValues::parse(render(cfg)), kFixtures / "gmm2d");
  EXPECT_EQ(render(again), render(cfg));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_run_config(KeyValues::parse("solver.nfee = 3\n"), "."), ConfigError);
  EXPECT_THROW(KeyValues::parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_run_config(KeyValues::parse("solver.nfe = many\n"), "."), ConfigError);
  auto kv = KeyValues::load(kFixtures / "gmm2d" / "reduction.cfg");
  kv.set("solver.gamma_mod", "0");
  try {
    build_problem(parse_run_config(kv, kFixtures / "gmm2d"));
    ADD_FAILURE() << "gamma_mod = 0 accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma_mod"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, FixturesLoad) {
  for (const char* f : {"blur2/ambiguity.cfg", "blur2/convergence.cfg", "blur2/solve.cfg", "phase2/symmetry.cfg",
                        "gmm2d/reduction.cfg", "inpaint/solve.cfg", "sr/solve.cfg"})
    EXPECT_NO_THROW(build_problem(load_run_config(kFixtures / f))) << f;
}

TEST(Io, RawRoundTrip) {
  const auto dir = scratch("raw");
  Rng rng(2);
  RawVector r{rng.normal_vector(33), 0.125, 77};
  r.values[3] = -0.0;
  r.values[4] = 1e-310;
  write_raw(dir / "v.f64", r);
  const auto back = read_raw(dir / "v.f64");
  EXPECT_EQ(back.values, r.values);
  EXPECT_EQ(back.sigma0, 0.125);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_TRUE(std::signbit(back.values[3]));
  EXPECT_EQ(slurp(dir / "v.f64").substr(0, 7), "TREGV1 ");
  write_text(dir / "bad.f64", "nope");
  EXPECT_THROW(read_raw(dir / "bad.f64"), IoError);
}

TEST(Io, PgmRoundTrip) {
  const auto dir = scratch("pgm");
  Rng rng(3);
  const GrayImage img{ImageShape{5, 7}, rng.normal_vector(35)};
  write_pgm(dir / "a.pgm", img);
  const auto back = read_pgm(dir / "a.pgm");
  EXPECT_EQ(back.shape, img.shape);
  const double step = (img.values.maxCoeff() - img.values.minCoeff()) / 65535.0;
  EXPECT_LE((back.values - img.values).cwiseAbs().maxCoeff(), step);
  write_pgm(dir / "b.pgm", back);
  EXPECT_EQ(slurp(dir / "a.pgm"), slurp(dir / "b.pgm"));
}

TEST(Io, MaskFixture) {
  const auto mask = read_mask(kFixtures / "inpaint" / "mask.pgm", ImageShape{16, 16});
  int holes = 0;
  for (auto m : mask) holes += m == 0;
  EXPECT_EQ(holes, 36);
  EXPECT_THROW(read_mask(kFixtures / "inpaint" / "mask.pgm", ImageShape{8, 8}), ConfigError);
}

TEST(Io, TraceRoundTrip) {
  const auto dir = scratch("trace");
  RunTrace tr;
  tr.steps.push_back(StepRecord{996, 991, Branch::Plain, 1.5, 0.25, 0.0, 0.0});
  tr.steps.push_back(StepRecord{991, 986, Branch::Gamma, 0.1 / 3, 2e-17, -0.3, -0.4});
  write_trace_csv(dir / "t.csv", tr);
  const auto back = read_trace_csv(dir / "t.csv");
  ASSERT_EQ(back.steps.size(), 2u);
  EXPECT_EQ(back.steps[1].t, 991);
  EXPECT_EQ(back.steps[1].branch, Branch::Gamma);
  EXPECT_EQ(back.steps[1].data_consistency, 0.1 / 3);
  EXPECT_EQ(back.steps[1].null_similarity, -0.3);
  EXPECT_EQ(slurp(dir / "t.csv").substr(0, 50), "t,branch,data_consistency,dsm_loss,null_similarity");
}

TEST(Io, PriorJson) {
  const auto codec = LatentCodec::random(4, 2, 1);
  const auto p = parse_prior_json(
      R"({"d": 2, "space": "latent", "concepts": [{"label": "x", "components": [{"w": 1, "mean": [1, 2], "var": 0.5}]}]})",
      codec, NullMode::UniformMarginal);
  EXPECT_EQ(p.num_concepts(), 1);
  EXPECT_EQ(p.concept_at(0).components[0].mean, (Vector(2) << 1, 2).finished());
  EXPECT_THROW(parse_prior_json(R"({"d": 3, "space": "latent", "concepts": []})", codec, NullMode::UniformMarginal),
               ConfigError);
  EXPECT_THROW(parse_prior_json("{", codec, NullMode::UniformMarginal), ConfigError);
}

TEST(Experiments, RestartSeedsAndThreads) {
  EXPECT_NE(restart_seed(5, 0), restart_seed(5, 1));
  EXPECT_EQ(restart_seed(5, 3), restart_seed(5, 3));
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](int i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  setenv("TREG_THREADS", "3", 1);
  EXPECT_EQ(thread_budget(), 3);
  unsetenv("TREG_THREADS");
  EXPECT_GE(thread_budget(), 1);
}

TEST(Experiments, ParallelForPropagatesErrors) {
  EXPECT_THROW(parallel_for(8, 3, [](int i) {
                 if (i == 5) throw RangeError("boom");
               }),
               RangeError);
}

TEST(Experiments, NearestConcept) {
  const auto p = ConceptPrior(1, {Concept{"lo", {{1.0, Vector::Constant(1, -1.0), 1.0}}},
                                  Concept{"hi", {{0.5, Vector::Constant(1, 1.0), 1.0}, {0.5, Vector::Constant(1, 5.0), 1.0}}}});
  EXPECT_EQ(nearest_concept(p, Vector::Constant(1, -0.2)), 0);
  EXPECT_EQ(nearest_concept(p, Vector::Constant(1, 0.2)), 1);
  EXPECT_EQ(nearest_concept(p, Vector::Constant(1, 4.0)), 1);
}

TEST(Cli, ExitCodes) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(cli({"frobnicate"}), 2);
  testing::internal::GetCapturedStderr();

  testing::internal::CaptureStderr();
  EXPECT_EQ(cli({"solve", "--config", "/nonexistent/thing.cfg"}), 2);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("/nonexistent/thing.cfg"), std::string::npos);

  testing::internal::CaptureStdout();
  EXPECT_EQ(cli({"show-config"}), 0);
  EXPECT_NE(testing::internal::GetCapturedStdout().find("solver.nfe"), std::string::npos);

  testing::internal::CaptureStdout();
  EXPECT_EQ(cli({"validate", "--config", (kFixtures / "blur2" / "solve.cfg").string()}), 0);
  testing::internal::GetCapturedStdout();
}

TEST(Cli, SolveIsByteIdentical) {
  const auto a = scratch("solve_a");
  const auto b = scratch("solve_b");
  const auto cfg = (kFixtures / "blur2" / "solve.cfg").string();
  testing::internal::CaptureStdout();
  EXPECT_EQ(cli({"solve", "--config", cfg, "--seed", "7", "--out", a.string()}), 0);
  EXPECT_EQ(cli({"solve", "--config", cfg, "--seed", "7", "--out", b.string()}), 0);
  testing::internal::GetCapturedStdout();
  const auto ta = tree(a);
  EXPECT_FALSE(ta.empty());
  EXPECT_TRUE(ta.count("report.json"));
  EXPECT_EQ(ta, tree(b));
}
