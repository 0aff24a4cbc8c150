#include "reasoner/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "reasoner/error.hpp"
#include "reasoner/io.hpp"

namespace reasoner {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'N', 'W', 'B', '1'};

struct LayerNames {
  LayerKind kind;
  std::string_view name;
};
constexpr LayerNames kLayerNames[] = {
    {LayerKind::dense, "dense"},     {LayerKind::relu, "relu"},       {LayerKind::leaky_relu, "leaky_relu"},
    {LayerKind::tanh, "tanh"},       {LayerKind::sigmoid, "sigmoid"}, {LayerKind::softmax, "softmax"},
    {LayerKind::reshape, "reshape"},
};

struct OutputNames {
  OutputKind kind;
  std::string_view name;
};
constexpr OutputNames kOutputNames[] = {
    {OutputKind::probabilities, "probabilities"},
    {OutputKind::logits, "logits"},
    {OutputKind::image, "image"},
    {OutputKind::scalar, "scalar"},
};

[[noreturn]] void incompatible(const std::string& net, std::size_t layer, const std::string& what) {
  throw Error(Errc::shape_incompatible, "network '" + net + "' layer " + std::to_string(layer) + ": " + what);
}

std::vector<double> flatten_json(const json& j) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& e : j) {
      auto part = flatten_json(e);
      out.insert(out.end(), part.begin(), part.end());
    }
  } else {
    throw Error(Errc::invalid_argument, "fixture values must be numbers or nested arrays");
  }
  return out;
}

Shape parse_shape(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(Errc::invalid_argument, "shape must be a non-empty array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
      throw Error(Errc::invalid_argument, "shape entries must be positive integers");
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& e : kLayerNames)
    if (e.kind == kind) return e.name;
  return "?";
}

std::string_view to_string(OutputKind kind) {
  for (const auto& e : kOutputNames)
    if (e.kind == kind) return e.name;
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& e : kLayerNames)
    if (e.name == name) return e.kind;
  throw Error(Errc::invalid_argument, "unknown layer kind '" + std::string(name) + "'");
}

OutputKind parse_output_kind(std::string_view name) {
  for (const auto& e : kOutputNames)
    if (e.name == name) return e.kind;
  throw Error(Errc::invalid_argument, "unknown output kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(Tensor weight, Tensor bias) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.weight = std::move(weight);
  l.bias = std::move(bias);
  return l;
}

LayerSpec LayerSpec::activation(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

LayerSpec LayerSpec::leaky(double slope) {
  LayerSpec l;
  l.kind = LayerKind::leaky_relu;
  l.slope = slope;
  return l;
}

LayerSpec LayerSpec::reshape_to(Shape shape) {
  LayerSpec l;
  l.kind = LayerKind::reshape;
  l.target_shape = std::move(shape);
  return l;
}

// ---------------------------------------------------------------------------

NetworkBundle::NetworkBundle(std::string name, Shape input_shape, OutputKind output_kind,
                             std::vector<LayerSpec> layers, std::vector<Fixture> fixtures, json metadata)
    : name_(std::move(name)),
      input_shape_(std::move(input_shape)),
      output_kind_(output_kind),
      layers_(std::move(layers)),
      fixtures_(std::move(fixtures)),
      metadata_(std::move(metadata)) {
  if (input_shape_.empty()) throw Error(Errc::shape_incompatible, "network '" + name_ + "' has an empty input shape");
  Shape current = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    switch (layer.kind) {
      case LayerKind::dense: {
        const Shape& w = layer.weight.shape();
        if (w.size() != 2) incompatible(name_, i, "dense weight must be rank 2, got " + to_string(w));
        if (layer.bias.shape() != Shape{w[0]})
          incompatible(name_, i, "dense bias shape " + to_string(layer.bias.shape()) + " does not match weight " + to_string(w));
        if (current != Shape{w[1]})
          incompatible(name_, i, "dense layer expects input [" + std::to_string(w[1]) + "], got " + to_string(current));
        current = Shape{w[0]};
        break;
      }
      case LayerKind::softmax:
        if (current.size() != 1) incompatible(name_, i, "softmax expects rank-1 input, got " + to_string(current));
        break;
      case LayerKind::reshape:
        if (element_count(layer.target_shape) != element_count(current) || layer.target_shape.empty())
          incompatible(name_, i, "cannot reshape " + to_string(current) + " to " + to_string(layer.target_shape));
        current = layer.target_shape;
        break;
      default:
        break;
    }
  }
  output_shape_ = current;
  if (output_kind_ == OutputKind::probabilities &&
      (layers_.empty() || layers_.back().kind != LayerKind::softmax)) {
    throw Error(Errc::shape_incompatible, "network '" + name_ + "' declares probabilities but does not end in softmax");
  }
  for (std::size_t k = 0; k < fixtures_.size(); ++k) {
    if (fixtures_[k].input.size() != element_count(input_shape_) ||
        fixtures_[k].output.size() != element_count(output_shape_)) {
      throw Error(Errc::shape_incompatible, "network '" + name_ + "' fixture " + std::to_string(k) +
                                                " does not match the network's input/output shapes");
    }
    fixtures_[k].input = fixtures_[k].input.reshaped(input_shape_);
    fixtures_[k].output = fixtures_[k].output.reshaped(output_shape_);
  }
}

Var NetworkBundle::forward(const Var& x) const {
  if (x.shape() != input_shape_) {
    throw Error(Errc::shape_mismatch, "network '" + name_ + "' expects input " + to_string(input_shape_) + ", got " +
                                          to_string(x.shape()));
  }
  Var h = x;
  for (const LayerSpec& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::dense: h = add(matvec(Var(layer.weight), h), Var(layer.bias)); break;
      case LayerKind::relu: h = relu(h); break;
      case LayerKind::leaky_relu: h = leaky_relu(h, layer.slope); break;
      case LayerKind::tanh: h = tanh(h); break;
      case LayerKind::sigmoid: h = sigmoid(h); break;
      case LayerKind::softmax: h = softmax(h); break;
      case LayerKind::reshape: h = reshape(h, layer.target_shape); break;
    }
  }
  return h;
}

Tensor NetworkBundle::forward(const Tensor& x) const { return forward(Var(x)).value(); }

NetworkBundle concatenate(std::span<const NetworkBundle> nets) {
  if (nets.empty()) throw Error(Errc::invalid_argument, "cannot concatenate an empty network list");
  std::string name;
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    if (i > 0 && nets[i - 1].output_shape() != nets[i].input_shape()) {
      throw Error(Errc::shape_incompatible, "cannot feed '" + nets[i - 1].name() + "' output " +
                                                to_string(nets[i - 1].output_shape()) + " into '" + nets[i].name() +
                                                "' input " + to_string(nets[i].input_shape()));
    }
    name += (i ? "+" : "") + nets[i].name();
    layers.insert(layers.end(), nets[i].layers().begin(), nets[i].layers().end());
  }
  return NetworkBundle(name, nets.front().input_shape(), nets.back().output_kind(), std::move(layers));
}

// ---------------------------------------------------------------------------
// NWB1 codec

NetworkBundle parse_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::bad_magic, "not an NWB1 bundle (bad magic)");
  }
  const std::uint32_t header_len = io::get_u32_le(bytes, 4);
  if (8 + static_cast<std::size_t>(header_len) > bytes.size()) {
    throw Error(Errc::truncated, "bundle manifest extends past end of file");
  }
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed bundle manifest: ") + e.what());
  }
  auto payload = bytes.subspan(8 + header_len);

  try {
    // Extents first, so a cut-off file reports truncation rather than a bad checksum.
    std::size_t needed = 0;
    for (const auto& lj : manifest.at("layers")) {
      if (!lj.contains("tensors")) continue;
      for (const auto& [key, desc] : lj.at("tensors").items()) {
        needed = std::max(needed, desc.at("offset").get<std::size_t>() + 4 * element_count(parse_shape(desc.at("shape"))));
      }
    }
    if (needed > payload.size()) {
      throw Error(Errc::truncated, "payload holds " + std::to_string(payload.size()) + " bytes, tensors need " +
                                       std::to_string(needed));
    }
    const auto want_crc = manifest.at("crc32").get<std::uint32_t>();
    const auto got_crc = io::crc32(payload);
    if (want_crc != got_crc) {
      throw Error(Errc::checksum_mismatch, "payload crc32 " + std::to_string(got_crc) + " does not match manifest " +
                                               std::to_string(want_crc));
    }

    auto read_tensor = [&](const json& desc) {
      Shape shape = parse_shape(desc.at("shape"));
      const auto offset = desc.at("offset").get<std::size_t>();
      const std::size_t n = element_count(shape);
      if (offset + 4 * n > payload.size()) {
        throw Error(Errc::truncated, "tensor at offset " + std::to_string(offset) + " extends past payload end");
      }
      std::vector<double> data(n);
      for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(io::get_f32_le(payload, offset + 4 * i));
      return Tensor(std::move(shape), std::move(data));
    };

    std::vector<LayerSpec> layers;
    for (const auto& lj : manifest.at("layers")) {
      LayerSpec layer;
      layer.kind = parse_layer_kind(lj.at("kind").get<std::string>());
      const json params = lj.value("params", json::object());
      switch (layer.kind) {
        case LayerKind::dense: {
          const auto& tensors = lj.at("tensors");
          layer.weight = read_tensor(tensors.at("W"));
          layer.bias = read_tensor(tensors.at("b"));
          break;
        }
        case LayerKind::leaky_relu: layer.slope = params.value("slope", 0.01); break;
        case LayerKind::reshape: layer.target_shape = parse_shape(params.at("shape")); break;
        default: break;
      }
      layers.push_back(std::move(layer));
    }

    Shape input_shape = parse_shape(manifest.at("input_shape"));
    std::vector<Fixture> fixtures;
    for (const auto& fj : manifest.value("fixtures", json::array())) {
      auto in = flatten_json(fj.at("input"));
      auto out = flatten_json(fj.at("output"));
      fixtures.push_back(Fixture{Tensor::vector(std::move(in)), Tensor::vector(std::move(out))});
    }
    return NetworkBundle(manifest.at("name").get<std::string>(), std::move(input_shape),
                         parse_output_kind(manifest.at("output_kind").get<std::string>()), std::move(layers),
                         std::move(fixtures), manifest.value("metadata", json::object()));
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed bundle manifest: ") + e.what());
  }
}

NetworkBundle load_bundle(const std::filesystem::path& path) {
  auto bytes = io::read_file(path);
  try {
    return parse_bundle(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> serialize_bundle(const NetworkBundle& net) {
  std::vector<std::uint8_t> payload;
  auto put_tensor = [&](const Tensor& t) {
    json desc{{"shape", t.shape()}, {"offset", payload.size()}};
    for (double v : t.data()) io::put_f32_le(payload, static_cast<float>(v));
    return desc;
  };

  json layers = json::array();
  for (const LayerSpec& layer : net.layers()) {
    json lj{{"kind", to_string(layer.kind)}, {"params", json::object()}};
    switch (layer.kind) {
      case LayerKind::dense: lj["tensors"] = {{"W", put_tensor(layer.weight)}, {"b", put_tensor(layer.bias)}}; break;
      case LayerKind::leaky_relu: lj["params"]["slope"] = layer.slope; break;
      case LayerKind::reshape: lj["params"]["shape"] = layer.target_shape; break;
      default: break;
    }
    layers.push_back(std::move(lj));
  }
  json fixtures = json::array();
  for (const Fixture& f : net.fixtures()) fixtures.push_back({{"input", f.input.to_vector()}, {"output", f.output.to_vector()}});

  json manifest{{"name", net.name()},
                {"input_shape", net.input_shape()},
                {"output_kind", to_string(net.output_kind())},
                {"layers", std::move(layers)},
                {"fixtures", std::move(fixtures)},
                {"crc32", io::crc32(payload)}};
  if (!net.metadata().empty()) manifest["metadata"] = net.metadata();
  const std::string header = manifest.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  io::put_u32_le(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void save_bundle(const NetworkBundle& net, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_bundle(net));
}

std::vector<FixtureCheck> verify_fixtures(const NetworkBundle& net, double tolerance) {
  std::vector<FixtureCheck> checks;
  for (std::size_t k = 0; k < net.fixtures().size(); ++k) {
    const Fixture& f = net.fixtures()[k];
    const Tensor got = net.forward(f.input);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double want = f.output[i];
      worst = std::max(worst, std::abs(got[i] - want) / std::max(1.0, std::abs(want)));
    }
    checks.push_back(FixtureCheck{k, worst, std::isfinite(worst) && worst <= tolerance});
  }
  return checks;
}

}  // namespace reasoner
