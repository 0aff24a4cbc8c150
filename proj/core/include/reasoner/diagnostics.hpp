#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "reasoner/archive.hpp"
#include "reasoner/model.hpp"
#include "reasoner/network.hpp"
#include "reasoner/vi.hpp"

namespace reasoner {

/// Gaussian fit of a feature ensemble (covariance with the n-1 denominator).
struct EnsembleStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t count = 0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  /// Checks n >= 2, symmetry and numerical PSD (eigenvalues >= -1e-9).
  void validate() const;
};

/// Stats of `rows` (row-major, each row `dim` wide).
EnsembleStats ensemble_stats(std::span<const double> rows, std::size_t dim);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the trace of the
/// square root taken from the eigenvalues of S_a^(1/2) S_b S_a^(1/2).
double frechet_distance(const EnsembleStats& a, const EnsembleStats& b);

/// Maps one latent draw to a feature vector.
using FeatureMap = std::function<std::vector<double>(std::span<const double>)>;

/// generator (optional) followed by `embedding`. The generator reads the
/// latent block starting at `latent_offset`; without a generator the draw
/// itself (from the offset) is the embedding input.
FeatureMap network_feature_map(std::shared_ptr<const NetworkBundle> generator,
                               std::shared_ptr<const NetworkBundle> embedding, std::size_t latent_offset = 0);

/// Stats of the retained draws after `features`.
EnsembleStats embed_ensemble(const SampleArchive& archive, const FeatureMap& features);
EnsembleStats embed_ensemble(const SampleArchive& archive, std::shared_ptr<const NetworkBundle> generator,
                             std::shared_ptr<const NetworkBundle> embedding, std::size_t latent_offset = 0);
/// Reference path: raw images straight through the embedding.
EnsembleStats embed_images(std::span<const Tensor> images, const NetworkBundle& embedding);

struct FidPoint {
  std::size_t iteration = 0;  // warmup rows used (cumulative) or window end (sliding)
  double cumulative = 0.0;
  double sliding = 0.0;
};

struct WarmupFidSeries {
  std::size_t chain = 0;
  std::vector<FidPoint> points;
};

/// Frechet distance to `reference` along each chain's warmup section, every
/// `stride` rows: over all rows so far and over the last `window` rows.
std::vector<WarmupFidSeries> warmup_fid_series(const SampleArchive& archive, const FeatureMap& features,
                                               const EnsembleStats& reference, std::size_t stride,
                                               std::size_t window);

/// Per-label reference statistics shipped next to an embedding bundle.
struct ReferenceStats {
  std::string embedding;
  std::vector<int> labels;
  std::vector<EnsembleStats> stats;
  std::optional<EnsembleStats> overall;

  const EnsembleStats& for_label(int label) const;
};

nlohmann::ordered_json to_json(const EnsembleStats& stats);
EnsembleStats stats_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const ReferenceStats& ref);
ReferenceStats reference_stats_from_json(const nlohmann::ordered_json& j);
ReferenceStats load_reference_stats(const std::filesystem::path& path);

/// Maps one latent draw to class probabilities.
using ProbabilityMap = std::function<Tensor(std::span<const double>)>;

ProbabilityMap pipeline_probabilities(const ModelGraph& graph, std::string pipeline);
/// Generator (optional) followed by a classifier, outside any model graph.
ProbabilityMap network_probabilities(std::shared_ptr<const NetworkBundle> generator,
                                     std::shared_ptr<const NetworkBundle> classifier, std::size_t latent_offset = 0);

std::size_t argmax(std::span<const double> values);

/// Fraction of retained draws whose most probable class is `target`.
double constraint_accuracy(const SampleArchive& archive, const ProbabilityMap& decoder, std::size_t target);

/// Argmax class of each named pipeline at `xi`.
std::vector<std::size_t> decode(const ModelGraph& graph, std::span<const std::string> pipelines,
                                std::span<const double> xi);

// ---------------------------------------------------------------------------
// Riddle progress

struct RiddleCheckpoint {
  std::size_t iter = 0;
  double stage_alpha = 1.0;
  double elbo_final_alpha = 0.0;
  std::vector<std::vector<std::size_t>> decoded;  // per sample
  std::vector<double> scores;                     // per sample: mean constraint probability
  std::vector<double> truth_probability;          // per sample, when the recorder knows the truth
};

struct RiddleRun {
  std::uint64_t seed = 0;
  std::vector<AnnealStage> schedule;
  std::vector<RiddleCheckpoint> checkpoints;
};

struct RiddleMetrics {
  std::size_t runs = 0;
  std::vector<std::size_t> iter;
  std::vector<double> stage_alpha;
  std::vector<double> elbo_final_alpha;
  std::vector<double> accuracy;
  std::vector<double> score;
  std::vector<double> frac_any_correct;
  std::vector<double> frac_all_correct;
  /// Mean over samples of the probability assigned to the truth (product over
  /// decoded pipelines); empty unless every checkpoint carries it.
  std::vector<double> truth_likelihood;
  /// First iteration of every stage after the first.
  std::vector<std::size_t> stage_boundaries;
  /// Fraction of runs whose last checkpoint decodes to the truth for every sample.
  double success_rate = 0.0;
};

bool all_correct(const RiddleCheckpoint& checkpoint, std::span<const std::size_t> truth);

/// Averages over runs. Runs must share the schedule and checkpoint iterations.
RiddleMetrics riddle_metrics(std::span<const RiddleRun> runs, std::span<const std::size_t> truth);

nlohmann::ordered_json to_json(const RiddleRun& run);
RiddleRun riddle_run_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const RiddleMetrics& metrics);
std::string to_csv(const RiddleMetrics& metrics);

struct RiddleRecorderConfig {
  std::vector<std::string> decode_pipelines;
  AnnealSchedule schedule;
  /// Optional; enables per-sample truth probabilities.
  std::vector<std::size_t> truth;
  /// Draws per checkpoint; antithetic pairs by default, matching the ELBO
  /// estimator's five pairs.
  std::size_t n_samples = 10;
  bool antithetic = true;
  std::size_t elbo_pairs = 5;
  std::uint64_t seed = 0;
};

/// Builds checkpoints from VI observer callbacks. Sampling uses its own
/// generator so recording does not perturb the optimization.
class RiddleRecorder {
 public:
  RiddleRecorder(const ModelGraph& graph, RiddleRecorderConfig config);

  void observe(const VariationalState& state, const TraceRecord& record);
  /// Observer bound to this recorder (which must outlive the fit).
  std::function<void(const VariationalState&, const TraceRecord&)> observer();

  RiddleCheckpoint checkpoint(const VariationalState& state, const TraceRecord& record);
  RiddleRun take();

 private:
  const ModelGraph& graph_;
  RiddleRecorderConfig config_;
  Rng rng_;
  RiddleRun run_;
};

}  // namespace reasoner
