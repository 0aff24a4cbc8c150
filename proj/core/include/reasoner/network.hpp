#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reasoner/autodiff.hpp"
#include "reasoner/tensor.hpp"

namespace reasoner {

enum class LayerKind { dense, relu, leaky_relu, tanh, sigmoid, softmax, reshape };
enum class OutputKind { probabilities, logits, image, scalar };

std::string_view to_string(LayerKind kind);
std::string_view to_string(OutputKind kind);
LayerKind parse_layer_kind(std::string_view name);
OutputKind parse_output_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  double slope = 0.01;   // leaky_relu
  Shape target_shape;    // reshape
  Tensor weight;         // dense, [out, in]
  Tensor bias;           // dense, [out]

  static LayerSpec dense(Tensor weight, Tensor bias);
  static LayerSpec activation(LayerKind kind);
  static LayerSpec leaky(double slope);
  static LayerSpec reshape_to(Shape shape);
};

/// Golden (input, output) pair recorded by the exporter.
struct Fixture {
  Tensor input;
  Tensor output;
};

/// An immutable feed-forward network. Construction validates the layer chain
/// end to end, so a constructed bundle always accepts `input_shape()`.
class NetworkBundle {
 public:
  NetworkBundle(std::string name, Shape input_shape, OutputKind output_kind, std::vector<LayerSpec> layers,
                std::vector<Fixture> fixtures = {}, nlohmann::json metadata = nlohmann::json::object());

  const std::string& name() const noexcept { return name_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }
  OutputKind output_kind() const noexcept { return output_kind_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const std::vector<Fixture>& fixtures() const noexcept { return fixtures_; }
  const nlohmann::json& metadata() const noexcept { return metadata_; }

  /// Layer-by-layer evaluation. Weights enter as constants; gradients flow to
  /// `x` when it is tracked.
  Var forward(const Var& x) const;
  Tensor forward(const Tensor& x) const;

 private:
  std::string name_;
  Shape input_shape_;
  Shape output_shape_;
  OutputKind output_kind_;
  std::vector<LayerSpec> layers_;
  std::vector<Fixture> fixtures_;
  nlohmann::json metadata_;
};

/// Composite network evaluating `nets` in order.
NetworkBundle concatenate(std::span<const NetworkBundle> nets);

// NWB1 weight bundles: "NWB1", u32-le manifest length, JSON manifest, then
// float32 little-endian payload addressed by byte offsets in the manifest.
NetworkBundle parse_bundle(std::span<const std::uint8_t> bytes);
NetworkBundle load_bundle(const std::filesystem::path& path);
/// Weights are rounded to float32 on write.
std::vector<std::uint8_t> serialize_bundle(const NetworkBundle& net);
void save_bundle(const NetworkBundle& net, const std::filesystem::path& path);

struct FixtureCheck {
  std::size_t index = 0;
  double max_error = 0.0;  // max |got - want| / max(1, |want|)
  bool passed = false;
};

std::vector<FixtureCheck> verify_fixtures(const NetworkBundle& net, double tolerance = 1e-5);

}  // namespace reasoner
