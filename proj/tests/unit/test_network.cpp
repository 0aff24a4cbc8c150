#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include <nlohmann/json.hpp>

#include <reasoner/error.hpp>
#include <reasoner/io.hpp>
#include <reasoner/network.hpp>

#include "support.hpp"

using namespace reasoner;
using testing_support::source_path;

namespace {

std::vector<std::uint8_t> fixture_bytes(const std::string& name) {
  return io::read_file(source_path("tests/fixtures/" + name));
}

Errc parse_error(std::span<const std::uint8_t> bytes) {
  try {
    parse_bundle(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "bundle parsed unexpectedly";
  return Errc::io;
}

// Reads an NWB1 file without the library and evaluates it with plain loops.
struct RawNetwork {
  nlohmann::json manifest;
  std::vector<std::uint8_t> payload;

  explicit RawNetwork(const std::vector<std::uint8_t>& bytes) {
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 4, 4);
    manifest = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    payload.assign(bytes.begin() + 8 + len, bytes.end());
  }

  std::vector<double> tensor(const nlohmann::json& desc) const {
    std::size_t n = 1;
    for (auto d : desc["shape"]) n *= d.get<std::size_t>();
    std::vector<double> out(n);
    const auto offset = desc["offset"].get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, payload.data() + offset + 4 * i, 4);
      out[i] = f;
    }
    return out;
  }

  std::vector<double> forward(std::vector<double> x) const {
    for (const auto& layer : manifest["layers"]) {
      const std::string kind = layer["kind"];
      if (kind == "dense") {
        const auto w = tensor(layer["tensors"]["W"]);
        const auto b = tensor(layer["tensors"]["b"]);
        std::vector<double> y(b);
        for (std::size_t r = 0; r < b.size(); ++r)
          for (std::size_t c = 0; c < x.size(); ++c) y[r] += w[r * x.size() + c] * x[c];
        x = y;
      } else if (kind == "tanh") {
        for (double& v : x) v = std::tanh(v);
      } else if (kind == "sigmoid") {
        for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
      } else if (kind == "relu") {
        for (double& v : x) v = std::max(v, 0.0);
      } else if (kind == "leaky_relu") {
        const double slope = layer["params"]["slope"];
        for (double& v : x) v = v > 0 ? v : slope * v;
      } else if (kind == "softmax") {
        double m = *std::max_element(x.begin(), x.end()), s = 0.0;
        for (double& v : x) s += (v = std::exp(v - m));
        for (double& v : x) v /= s;
      }
    }
    return x;
  }
};

const char* kFixtures[] = {"tiny_generator.nwb", "tiny_classifier.nwb", "tiny_relu.nwb", "tiny_embedding.nwb"};

}  // namespace

TEST(Bundle, ExporterFixturesReproduce) {
  for (const char* name : kFixtures) {
    const NetworkBundle net = load_bundle(source_path(std::string("tests/fixtures/") + name));
    ASSERT_FALSE(net.fixtures().empty()) << name;
    for (const auto& check : verify_fixtures(net)) EXPECT_TRUE(check.passed) << name << " fixture " << check.index;
  }
}

TEST(Bundle, ShippedDemoNetworksReproduceFixtures) {
  for (const char* name : {"generator", "classifier", "classifier_independent", "embedding", "linear_generator"}) {
    const NetworkBundle net = load_bundle(source_path(std::string("data/networks/") + name + ".nwb"));
    for (const auto& check : verify_fixtures(net)) EXPECT_TRUE(check.passed) << name;
  }
}

TEST(Bundle, ForwardMatchesIndependentReader) {
  std::mt19937_64 rng(1);
  for (const char* name : kFixtures) {
    const auto bytes = fixture_bytes(name);
    const NetworkBundle net = parse_bundle(bytes);
    const RawNetwork raw(bytes);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = testing_support::normal_vector(rng, element_count(net.input_shape()));
      const Tensor got = net.forward(Tensor::vector(x).reshaped(net.input_shape()));
      const auto want = raw.forward(x);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << name;
    }
  }
}

TEST(Bundle, ManifestFieldsSurvive) {
  const NetworkBundle net = load_bundle(source_path("tests/fixtures/tiny_generator.nwb"));
  EXPECT_EQ(net.name(), "tiny_generator");
  EXPECT_EQ(net.input_shape(), (Shape{4}));
  EXPECT_EQ(net.output_shape(), (Shape{3, 3}));
  EXPECT_EQ(net.output_kind(), OutputKind::image);
  EXPECT_EQ(load_bundle(source_path("tests/fixtures/tiny_relu.nwb")).metadata().at("note"), "relu chain");
}

TEST(Bundle, SerializeRoundTripIsExact) {
  for (const char* name : kFixtures) {
    const NetworkBundle net = parse_bundle(fixture_bytes(name));
    const auto bytes = serialize_bundle(net);
    const NetworkBundle again = parse_bundle(bytes);
    EXPECT_EQ(serialize_bundle(again), bytes);
    const Tensor x = Tensor::filled(net.input_shape(), 0.3);
    EXPECT_TRUE(bitwise_equal(net.forward(x), again.forward(x)));
  }
}

TEST(BundleErrors, BadMagic) {
  auto bytes = fixture_bytes("tiny_relu.nwb");
  bytes[3] = 'X';
  EXPECT_EQ(parse_error(bytes), Errc::bad_magic);
  EXPECT_EQ(parse_error(std::vector<std::uint8_t>{'N', 'W'}), Errc::bad_magic);
}

TEST(BundleErrors, TruncatedPayloadAndHeader) {
  auto bytes = fixture_bytes("tiny_relu.nwb");
  auto cut = bytes;
  cut.resize(cut.size() - 5);
  EXPECT_EQ(parse_error(cut), Errc::truncated);
  cut.resize(20);
  EXPECT_EQ(parse_error(cut), Errc::truncated);
}

TEST(BundleErrors, ChecksumMismatch) {
  auto bytes = fixture_bytes("tiny_relu.nwb");
  bytes.back() ^= 0x40;
  EXPECT_EQ(parse_error(bytes), Errc::checksum_mismatch);
}

TEST(BundleErrors, ShapeIncompatibility) {
  const auto bytes = fixture_bytes("tiny_relu.nwb");
  RawNetwork raw(bytes);
  raw.manifest["input_shape"] = {6};
  const std::string header = raw.manifest.dump();
  std::vector<std::uint8_t> edited{'N', 'W', 'B', '1'};
  io::put_u32_le(edited, static_cast<std::uint32_t>(header.size()));
  edited.insert(edited.end(), header.begin(), header.end());
  edited.insert(edited.end(), raw.payload.begin(), raw.payload.end());
  EXPECT_EQ(parse_error(edited), Errc::shape_incompatible);
}

TEST(BundleErrors, MalformedManifest) {
  std::vector<std::uint8_t> bytes{'N', 'W', 'B', '1'};
  const std::string header = "{\"name\": ";
  io::put_u32_le(bytes, static_cast<std::uint32_t>(header.size()));
  bytes.insert(bytes.end(), header.begin(), header.end());
  EXPECT_EQ(parse_error(bytes), Errc::invalid_argument);
}

TEST(BundleErrors, ErrorsNameTheFile) {
  testing_support::TempDir dir("bundle");
  auto bytes = fixture_bytes("tiny_relu.nwb");
  bytes.back() ^= 1;
  io::write_file_atomic(dir / "broken.nwb", bytes);
  try {
    load_bundle(dir / "broken.nwb");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::checksum_mismatch);
    EXPECT_NE(std::string(e.what()).find("broken.nwb"), std::string::npos);
  }
}

TEST(NetworkConstruction, ValidatesChain) {
  const Tensor w = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::vector({0, 0});
  EXPECT_NO_THROW(NetworkBundle("ok", {3}, OutputKind::logits, {LayerSpec::dense(w, b)}));
  try {
    NetworkBundle("bad", {4}, OutputKind::logits, {LayerSpec::dense(w, b)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_incompatible);
  }
  EXPECT_THROW(NetworkBundle("r", {3}, OutputKind::logits, {LayerSpec::reshape_to({2, 2})}), Error);
  EXPECT_THROW(NetworkBundle("s", {3}, OutputKind::probabilities, {LayerSpec::dense(w, b)}), Error);
  EXPECT_NO_THROW(NetworkBundle("p", {3}, OutputKind::probabilities,
                                {LayerSpec::dense(w, b), LayerSpec::activation(LayerKind::softmax)}));
}

TEST(NetworkConstruction, FixtureCheckFlagsWrongOutputs) {
  const Tensor w = Tensor::matrix(1, 2, {1.0, -1.0});
  NetworkBundle good("n", {2}, OutputKind::logits, {LayerSpec::dense(w, Tensor::vector({0.5}))},
                     {Fixture{Tensor::vector({1, 2}), Tensor::vector({-0.5})}});
  EXPECT_TRUE(verify_fixtures(good)[0].passed);
  NetworkBundle bad("n", {2}, OutputKind::logits, {LayerSpec::dense(w, Tensor::vector({0.5}))},
                    {Fixture{Tensor::vector({1, 2}), Tensor::vector({-0.4999})}});
  const auto check = verify_fixtures(bad)[0];
  EXPECT_FALSE(check.passed);
  EXPECT_NEAR(check.max_error, 1e-4, 1e-9);
}

TEST(Concatenate, ComposesAndChecksInterfaces) {
  const NetworkBundle gen = load_bundle(source_path("tests/fixtures/tiny_generator.nwb"));
  const NetworkBundle cls = load_bundle(source_path("tests/fixtures/tiny_classifier.nwb"));
  const NetworkBundle pair[] = {gen, cls};
  const NetworkBundle both = concatenate(pair);
  EXPECT_EQ(both.input_shape(), gen.input_shape());
  EXPECT_EQ(both.output_kind(), OutputKind::probabilities);
  const Tensor z = Tensor::vector({0.1, -0.4, 0.7, 1.2});
  EXPECT_TRUE(bitwise_equal(both.forward(z), cls.forward(gen.forward(z))));

  const NetworkBundle wrong[] = {cls, gen};
  try {
    concatenate(wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_incompatible);
  }
}

TEST(NetworkGradient, InputGradientMatchesFiniteDifferences) {
  const NetworkBundle gen = load_bundle(source_path("tests/fixtures/tiny_generator.nwb"));
  const NetworkBundle cls = load_bundle(source_path("tests/fixtures/tiny_classifier.nwb"));
  auto f = [&](const Var& z) { return log(slice(reshape(cls.forward(gen.forward(z)), {3}), 1, 1)); };
  const std::vector<double> z0{0.3, -0.2, 0.5, -1.0};
  Tape tape;
  const auto g = tape.gradient(sum(f(tape.input(Tensor::vector(z0))))).at(0);
  const auto numeric = testing_support::numeric_gradient(
      [&](std::span<const double> z) { return f(Var(Tensor::vector({z[0], z[1], z[2], z[3]}))).value()[0]; }, z0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], numeric[i], 1e-5 * std::max(1.0, std::abs(numeric[i])));
}
