#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include <reasoner/archive.hpp>
#include <reasoner/io.hpp>
#include <reasoner/network.hpp>

#include "commands.hpp"
#include "support.hpp"

using namespace reasoner;
using nlohmann::json;
using testing_support::source_path;
using testing_support::TempDir;

namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "reasoner");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string spec(const std::string& name) { return source_path("data/specs/" + name).string(); }

json read_json(const std::filesystem::path& p) { return json::parse(io::read_text(p)); }

void write_json(const std::filesystem::path& p, const json& j) { io::write_text_atomic(p, j.dump(2)); }

// Linear generator z -> G z reshaped to [h, w].
void save_linear_generator(const std::filesystem::path& path, const Eigen::MatrixXd& g, std::size_t h, std::size_t w) {
  std::vector<double> weight(g.size());
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) weight[r * g.cols() + c] = g(r, c);
  std::vector<LayerSpec> layers = {
      LayerSpec::dense(Tensor({static_cast<std::size_t>(g.rows()), static_cast<std::size_t>(g.cols())}, weight),
                       Tensor::zeros({static_cast<std::size_t>(g.rows())})),
      LayerSpec::reshape_to({h, w})};
  save_bundle(NetworkBundle("gen", {static_cast<std::size_t>(g.cols())}, OutputKind::image, std::move(layers)), path);
}

json image_spec(std::size_t dim, const std::vector<double>& target, double noise, const json& extra_stages) {
  json observed = {{"name", "observed"}, {"input", "image"}, {"stages", extra_stages}};
  return {{"latents", {{{"name", "z"}, {"dim", dim}}}},
          {"networks", {{{"name", "gen"}, {"bundle", "gen.nwb"}}}},
          {"pipelines", {{{"name", "image"}, {"input", "z"}, {"stages", {{{"op", "network"}, {"name", "gen"}}}}}, observed}},
          {"constraints",
           {{{"type", "gaussian"}, {"label", "data"}, {"inputs", {"observed"}}, {"target", target}, {"noise_cov", noise}}}},
          {"metadata", {{"seed", 5}}}};
}

// Recursive equality with a relative tolerance on numbers.
void expect_json_near(const json& a, const json& b, const std::string& where = "") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    EXPECT_NEAR(x, y, 1e-9 * std::max(1.0, std::abs(y))) << where;
    return;
  }
  ASSERT_EQ(a.type(), b.type()) << where;
  if (a.is_array()) {
    ASSERT_EQ(a.size(), b.size()) << where;
    for (std::size_t i = 0; i < a.size(); ++i) expect_json_near(a[i], b[i], where + "/" + std::to_string(i));
  } else if (a.is_object()) {
    ASSERT_EQ(a.size(), b.size()) << where;
    for (const auto& item : a.items()) {
      ASSERT_TRUE(b.contains(item.key())) << where << "/" << item.key();
      expect_json_near(item.value(), b[item.key()], where + "/" + item.key());
    }
  } else {
    EXPECT_EQ(a, b) << where;
  }
}

}  // namespace

TEST(Cli, ShippedSpecsValidate) {
  for (const char* name : {"digit_condition.json", "reconstruct_coarse.json", "reconstruct_masked.json",
                           "reconstruct_masked_aux.json", "riddle_synthetic.json"}) {
    const auto r = invoke({"validate", spec(name)});
    EXPECT_EQ(r.code, 0) << name << ": " << r.err;
    EXPECT_NE(r.out.find("valid"), std::string::npos);
  }
}

TEST(Cli, InvalidSpecsExitWithInputError) {
  TempDir dir("cli");
  json j = read_json(spec("digit_condition.json"));
  j["networks"][0]["bundle"] = source_path("data/networks/generator.nwb").string();
  j["networks"][1]["bundle"] = source_path("data/networks/classifier.nwb").string();
  json bad_alpha = j;
  bad_alpha["constraints"][0]["alpha"] = -1;
  write_json(dir / "alpha.json", bad_alpha);
  auto r = invoke({"validate", (dir / "alpha.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/constraints/0/alpha"), std::string::npos) << r.err;

  json dangling = j;
  dangling["constraints"][0]["inputs"] = {"nowhere"};
  write_json(dir / "dangling.json", dangling);
  EXPECT_EQ(invoke({"validate", (dir / "dangling.json").string()}).code, 2);

  EXPECT_EQ(invoke({"validate", (dir / "missing.json").string()}).code, 2);
  io::write_text_atomic(dir / "broken.json", "{\"latents\": [");
  EXPECT_EQ(invoke({"validate", (dir / "broken.json").string()}).code, 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({"sample"}).code, 2);
  EXPECT_EQ(invoke({"bogus"}).code, 2);
  EXPECT_EQ(invoke({"sample", spec("riddle_synthetic.json"), "--method", "nuts", "--out", "/tmp/x"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, SampleIsDeterministic) {
  TempDir dir("cli");
  const std::vector<std::string> hmc = {"sample", spec("digit_condition.json"), "--chains", "2", "--draws", "50",
                                        "--warmup", "50", "--seed", "9"};
  auto a = hmc, b = hmc;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string()});
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  for (const char* f : {"samples.nsa", "metrics.json", "manifest.json"}) {
    EXPECT_EQ(io::read_file(dir / "a" / f), io::read_file(dir / "b" / f)) << f;
  }
  const json manifest = read_json(dir / "a" / "manifest.json");
  EXPECT_EQ(manifest["command"], "sample");
  EXPECT_FALSE(manifest.contains("wall_clock_seconds"));
  const auto archive = load_archive(dir / "a" / "samples.nsa");
  EXPECT_EQ(archive.n_chains, 2u);
  EXPECT_EQ(archive.n_draws, 50u);
  EXPECT_EQ(archive.master_seed, 9u);

  const std::vector<std::string> vi = {"sample", spec("riddle_synthetic.json"), "--method", "mf-linesearch",
                                       "--schedule", "1:30", "--samples", "20", "--seeds", "2"};
  auto c = vi, d = vi;
  c.insert(c.end(), {"--out", (dir / "c").string()});
  d.insert(d.end(), {"--out", (dir / "d").string()});
  ASSERT_EQ(invoke(c).code, 0);
  ASSERT_EQ(invoke(d).code, 0);
  EXPECT_EQ(io::read_file(dir / "c" / "manifest.json"), io::read_file(dir / "d" / "manifest.json"));
  EXPECT_EQ(io::read_file(dir / "c" / "runs" / "seed-1" / "samples.nsa"),
            io::read_file(dir / "d" / "runs" / "seed-1" / "samples.nsa"));
}

TEST(Cli, ReconstructMatchesWienerFilter) {
  TempDir dir("cli");
  std::mt19937_64 rng(3);
  const std::size_t d = 3;
  const auto gv = testing_support::normal_vector(rng, 4 * d);
  Eigen::MatrixXd g(4, d);
  for (std::size_t i = 0; i < 4 * d; ++i) g(i / d, i % d) = gv[i];
  save_linear_generator(dir / "gen.nwb", g, 2, 2);
  const std::vector<double> y = testing_support::normal_vector(rng, 4);
  const double noise = 0.3;
  write_json(dir / "spec.json", image_spec(d, y, noise, json::array()));
  const auto r = invoke({"reconstruct", (dir / "spec.json").string(), "--method", "mf-linesearch", "--schedule",
                      "1:1500", "--samples", "10", "--image", "image", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // Wiener filter in image space: C (C + sigma^2 I)^-1 y with C = G G'.
  const Eigen::MatrixXd c = g * g.transpose();
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), 4);
  const Eigen::VectorXd want = c * (c + noise * Eigen::MatrixXd::Identity(4, 4)).ldlt().solve(yv);
  const json image = read_json(dir / "out" / "image.json");
  EXPECT_EQ(image["shape"], json({2, 2}));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(image["mean"][i].get<double>(), want(i), 1e-6);
  for (const char* f : {"mean.pgm", "variance.pgm", "residuals.json", "trace.jsonl", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
}

TEST(Cli, MaskedPixelsCarryMoreVariance) {
  TempDir dir("cli");
  save_linear_generator(dir / "gen.nwb", Eigen::MatrixXd::Identity(4, 4), 2, 2);
  write_json(dir / "full.json", image_spec(4, {0.5, -0.5, 1.0, 0.0}, 0.05, json::array()));
  write_json(dir / "masked.json",
             image_spec(4, {0.5, -0.5}, 0.05, json::array({{{"op", "mask"}, {"columns", {1, 2}}}})));
  const auto r = invoke({"reconstruct", (dir / "full.json").string(), "--compare", (dir / "masked.json").string(),
                      "--chains", "2", "--draws", "500", "--warmup", "300", "--image", "image", "--out",
                      (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json cmp = read_json(dir / "out" / "comparison.json");
  EXPECT_GT(cmp["compare"]["mean_variance"].get<double>(), cmp["primary"]["mean_variance"].get<double>());
  const json masked = read_json(dir / "out" / "compare" / "image.json");
  // Column 1 is unobserved: variance near the prior's 1, column 0 near the noise level.
  EXPECT_GT(masked["variance"][1].get<double>(), 0.5);
  EXPECT_LT(masked["variance"][0].get<double>(), 0.1);
  EXPECT_TRUE(cmp.contains("mean_image_rms_difference"));
}

TEST(Cli, WrongShapeDataExitsTwo) {
  TempDir dir("cli");
  save_linear_generator(dir / "gen.nwb", Eigen::MatrixXd::Identity(4, 4), 2, 2);
  write_json(dir / "bad.json", image_spec(4, {0.5, -0.5, 1.0}, 0.05, json::array()));
  EXPECT_EQ(invoke({"sample", (dir / "bad.json").string(), "--out", (dir / "out").string()}).code, 2);
}

TEST(Cli, ReportAccuracyAndSelfFid) {
  TempDir dir("cli");
  ASSERT_EQ(invoke({"sample", spec("digit_condition.json"), "--chains", "2", "--draws", "100", "--warmup", "100",
                 "--out", (dir / "s").string()})
                .code,
            0);
  const std::string archive = (dir / "s" / "samples.nsa").string();
  auto r = invoke({"report", archive, spec("digit_condition.json"), "--metrics", "acc", "--pipeline", "digit",
                "--target", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const double acc = json::parse(r.out)["acc"]["in_model"].get<double>();
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);

  r = invoke({"report", archive, spec("digit_condition.json"), "--metrics", "fid", "--image", "image", "--embedding",
           source_path("data/networks/embedding.nwb").string(), "--reference-archive", archive, "--fid-stride", "20",
           "--fid-window", "40", "--out", (dir / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json fid = json::parse(r.out)["fid"];
  EXPECT_NEAR(fid["value"].get<double>(), 0.0, 1e-8);
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "fid_warmup.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "rep" / "manifest.json"));

  EXPECT_EQ(invoke({"report", archive, "--metrics", "acc"}).code, 2);
  EXPECT_EQ(invoke({"report", (dir / "none.nsa").string(), "--metrics", "fid"}).code, 2);
}

TEST(Cli, ReportAccuracyOfOneWhenAllDrawsDecodeToTarget) {
  TempDir dir("cli");
  const json j = read_json(spec("riddle_synthetic.json"));
  SampleArchive a = SampleArchive::create(1, 0, 4, 30);
  for (std::size_t i = 0; i < 4; ++i) a.draw(0, i)[3] = 5.0;  // p1 peaks at class 3
  save_archive(a, dir / "a.nsa");
  const auto r = invoke({"report", (dir / "a.nsa").string(), spec("riddle_synthetic.json"), "--metrics", "acc",
                      "--pipeline", "p1", "--target", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["acc"]["in_model"].get<double>(), 1.0);
}

TEST(Cli, RiddleRunsMatchGolden) {
  TempDir dir("cli");
  ASSERT_EQ(invoke({"sample", spec("riddle_synthetic.json"), "--method", "mf-linesearch", "--schedule",
                 "0.5:500,1:500,3:500,10:500", "--seeds", "3", "--decode", "p1,p2,p3", "--truth", "1,3,4", "--observe-every", "500",
                 "--samples", "10", "--out", (dir / "s").string()})
                .code,
            0);
  const json runs = read_json(dir / "s" / "riddle_runs.json");
  expect_json_near(runs, read_json(source_path("tests/fixtures/riddle_runs_golden.json")));

  const auto r = invoke({"report", "--metrics", "riddle", "--runs",
                      source_path("tests/fixtures/riddle_runs_golden.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  expect_json_near(json::parse(r.out), read_json(source_path("tests/fixtures/riddle_report_golden.json")));
}

TEST(Cli, FuzzedSpecsNeverCrash) {
  TempDir dir("cli");
  const std::string text = io::read_text(spec("riddle_synthetic.json"));
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::string mutated = text;
    for (int e = 0; e < 3; ++e) mutated[rng() % mutated.size()] = "{}[],:\"0a-"[rng() % 10];
    io::write_text_atomic(dir / "fuzz.json", mutated);
    const int code = invoke({"validate", (dir / "fuzz.json").string()}).code;
    EXPECT_TRUE(code == 0 || code == 2) << mutated;
  }
}
