#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reasoner/degradation.hpp"
#include "reasoner/logic.hpp"
#include "reasoner/network.hpp"
#include "reasoner/posterior.hpp"

namespace reasoner {

/// Floor applied before taking the log of a probability.
inline constexpr double kProbabilityFloor = 1e-300;

struct LatentBlock {
  std::string name;
  std::size_t dim = 0;
  std::size_t offset = 0;
};

struct Stage {
  enum class Kind { network, degrade, expectation, softmax, reshape };
  Kind kind = Kind::reshape;
  std::shared_ptr<const NetworkBundle> network;
  std::optional<DegradationOp> op;
  Tensor weights;  // expectation: [1, K] class values
  Shape shape;     // reshape target
};

/// A named chain of stages from a latent block (or another pipeline) to a
/// value in data space.
struct Pipeline {
  std::string name;
  std::string input;
  bool from_latent = true;
  std::size_t source = 0;  // latent block index or (earlier) pipeline index
  std::vector<Stage> stages;
  Shape output_shape;
  bool probabilities = false;
};

enum class TermKind { gaussian, categorical, logic };

std::string_view to_string(TermKind kind);

struct LikelihoodTerm {
  TermKind kind = TermKind::gaussian;
  std::string label;
  std::vector<std::size_t> inputs;  // pipeline indices
  // gaussian
  Tensor target;
  Tensor inverse_noise;
  double log_normalizer = 0.0;  // -1/2 sum log(2 pi N)
  // categorical
  std::size_t target_class = 0;
  // categorical, logic
  double alpha = 1.0;
  std::optional<LogicTensor> logic;

  bool tempered() const noexcept { return kind != TermKind::gaussian; }
};

struct CompileOptions {
  /// Relative bundle and data paths resolve against this directory.
  std::filesystem::path base_dir = ".";
  /// Networks supplied in memory. A spec network whose name appears here is
  /// not read from disk; stages may also reference these names directly.
  std::map<std::string, std::shared_ptr<const NetworkBundle>> networks;
};

/// Compiled joint log-density: sum of independent likelihood terms plus the
/// standard-normal prior on the stacked latent vector. Immutable and safe to
/// evaluate from several threads (each call owns its tape).
class ModelGraph final : public LatentPosterior {
 public:
  ModelGraph(std::vector<LatentBlock> latents, std::vector<Pipeline> pipelines, std::vector<LikelihoodTerm> terms,
             nlohmann::json metadata);

  std::size_t dim() const override { return dim_; }
  double log_likelihood(std::span<const double> xi, double alpha_scale, std::span<double> grad) const override;

  double log_density(const Tensor& xi) const;
  Tensor grad_log_density(const Tensor& xi) const;

  /// Per-term contributions at `xi` (alpha_scale applied to tempered terms).
  std::vector<double> term_log_densities(const Tensor& xi, double alpha_scale = 1.0) const;
  /// For each tempered term, the probability that it is satisfied: p_y for
  /// categorical terms, the contraction for logic terms.
  std::vector<double> constraint_probabilities(const Tensor& xi) const;
  Tensor pipeline_value(std::string_view name, const Tensor& xi) const;

  const std::vector<LatentBlock>& latents() const noexcept { return latents_; }
  const std::vector<Pipeline>& pipelines() const noexcept { return pipelines_; }
  const std::vector<LikelihoodTerm>& terms() const noexcept { return terms_; }
  const nlohmann::json& metadata() const noexcept { return metadata_; }
  std::optional<std::size_t> find_pipeline(std::string_view name) const;

 private:
  std::vector<Var> evaluate(const Var& xi) const;
  Var term_value(const LikelihoodTerm& term, const std::vector<Var>& values, double alpha_scale) const;
  void check_input(std::span<const double> xi) const;

  std::vector<LatentBlock> latents_;
  std::vector<Pipeline> pipelines_;  // topologically ordered
  std::vector<LikelihoodTerm> terms_;
  nlohmann::json metadata_;
  std::size_t dim_ = 0;
};

/// Validates and compiles a problem spec document. Unknown keys anywhere are
/// rejected; errors name the offending JSON location.
ModelGraph compile(const nlohmann::json& spec, const CompileOptions& options = {});
ModelGraph compile_file(const std::filesystem::path& path,
                        std::map<std::string, std::shared_ptr<const NetworkBundle>> networks = {});

}  // namespace reasoner
