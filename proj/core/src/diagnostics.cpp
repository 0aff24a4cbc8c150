#include "reasoner/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "reasoner/error.hpp"
#include "reasoner/io.hpp"

namespace reasoner {

namespace {

constexpr double kPsdTolerance = 1e-9;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw Error(Errc::non_finite, std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < -kPsdTolerance) {
      throw Error(Errc::invalid_argument, std::string(what) + " is not positive semidefinite");
    }
    lambda[i] = std::sqrt(std::max(lambda[i], 0.0));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void EnsembleStats::validate() const {
  if (count < 2) throw Error(Errc::invalid_argument, "ensemble stats need at least 2 samples");
  const auto d = mean.size();
  if (covariance.rows() != d || covariance.cols() != d) {
    throw Error(Errc::shape_mismatch, "covariance does not match the mean dimension");
  }
  if (!mean.allFinite() || !covariance.allFinite()) throw Error(Errc::non_finite, "ensemble stats are not finite");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(Errc::invalid_argument, "covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  if (d > 0 && eig.eigenvalues().minCoeff() < -kPsdTolerance) {
    throw Error(Errc::invalid_argument, "covariance is not positive semidefinite");
  }
}

EnsembleStats ensemble_stats(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw Error(Errc::shape_mismatch, "rows do not tile the feature dimension");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw Error(Errc::invalid_argument, "ensemble stats need at least 2 samples");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      rows.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  EnsembleStats s;
  s.count = n;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

double frechet_distance(const EnsembleStats& a, const EnsembleStats& b) {
  if (a.dim() != b.dim()) {
    throw Error(Errc::shape_mismatch, "feature dimensions differ: " + std::to_string(a.dim()) + " vs " +
                                          std::to_string(b.dim()));
  }
  a.validate();
  b.validate();
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance, "first covariance");
  Eigen::MatrixXd m = root_a * b.covariance * root_a;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(Errc::non_finite, "eigendecomposition failed");
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda < -kPsdTolerance) throw Error(Errc::invalid_argument, "covariance product is not positive semidefinite");
    trace_root += std::sqrt(std::max(lambda, 0.0));
  }
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_root;
  return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------

FeatureMap network_feature_map(std::shared_ptr<const NetworkBundle> generator,
                               std::shared_ptr<const NetworkBundle> embedding, std::size_t latent_offset) {
  if (!embedding) throw Error(Errc::invalid_argument, "embedding network is required");
  if (generator && generator->output_shape() != embedding->input_shape()) {
    throw Error(Errc::shape_incompatible, "generator output " + to_string(generator->output_shape()) +
                                              " does not feed embedding input " + to_string(embedding->input_shape()));
  }
  const Shape& in_shape = generator ? generator->input_shape() : embedding->input_shape();
  const std::size_t in_size = element_count(in_shape);
  return [generator, embedding, latent_offset, in_shape, in_size](std::span<const double> xi) {
    if (latent_offset + in_size > xi.size()) {
      throw Error(Errc::shape_mismatch, "draw of size " + std::to_string(xi.size()) + " is too short for the network input");
    }
    const auto part = xi.subspan(latent_offset, in_size);
    Tensor x = Tensor::vector(std::vector<double>(part.begin(), part.end())).reshaped(in_shape);
    if (generator) x = generator->forward(x);
    return embedding->forward(x).to_vector();
  };
}

EnsembleStats embed_ensemble(const SampleArchive& archive, const FeatureMap& features) {
  const std::size_t n = archive.total_draws();
  if (n == 0) throw Error(Errc::invalid_argument, "archive has no retained draws");
  std::vector<double> rows;
  std::size_t width = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto f = features(archive.draw(k));
    if (k == 0) {
      width = f.size();
      rows.reserve(n * width);
    }
    rows.insert(rows.end(), f.begin(), f.end());
  }
  return ensemble_stats(rows, width);
}

EnsembleStats embed_ensemble(const SampleArchive& archive, std::shared_ptr<const NetworkBundle> generator,
                             std::shared_ptr<const NetworkBundle> embedding, std::size_t latent_offset) {
  return embed_ensemble(archive, network_feature_map(std::move(generator), std::move(embedding), latent_offset));
}

EnsembleStats embed_images(std::span<const Tensor> images, const NetworkBundle& embedding) {
  if (images.empty()) throw Error(Errc::invalid_argument, "no images to embed");
  std::vector<double> rows;
  std::size_t width = 0;
  for (const Tensor& image : images) {
    const Tensor f = embedding.forward(image.reshaped(embedding.input_shape()));
    width = f.size();
    rows.insert(rows.end(), f.data().begin(), f.data().end());
  }
  return ensemble_stats(rows, width);
}

std::vector<WarmupFidSeries> warmup_fid_series(const SampleArchive& archive, const FeatureMap& features,
                                               const EnsembleStats& reference, std::size_t stride,
                                               std::size_t window) {
  if (archive.n_warmup < 2) throw Error(Errc::invalid_argument, "archive holds fewer than 2 warmup rows per chain");
  if (stride == 0) throw Error(Errc::invalid_argument, "stride must be positive");
  if (window < 2) throw Error(Errc::invalid_argument, "window must cover at least 2 rows");
  std::vector<WarmupFidSeries> out;
  for (std::size_t c = 0; c < archive.n_chains; ++c) {
    std::vector<double> rows;
    std::size_t width = 0;
    for (std::size_t i = 0; i < archive.n_warmup; ++i) {
      const auto f = features(archive.warmup(c, i));
      width = f.size();
      rows.insert(rows.end(), f.begin(), f.end());
    }
    WarmupFidSeries series{c, {}};
    std::vector<std::size_t> ends;
    for (std::size_t end = stride; end <= archive.n_warmup; end += stride) {
      if (end >= 2) ends.push_back(end);
    }
    if (ends.empty() || ends.back() != archive.n_warmup) ends.push_back(archive.n_warmup);
    for (std::size_t end : ends) {
      const std::size_t begin = end > window ? end - window : 0;
      const std::span<const double> all(rows.data(), end * width);
      const std::span<const double> recent(rows.data() + begin * width, (end - begin) * width);
      series.points.push_back({end, frechet_distance(ensemble_stats(all, width), reference),
                               frechet_distance(ensemble_stats(recent, width), reference)});
    }
    out.push_back(std::move(series));
  }
  return out;
}

// ---------------------------------------------------------------------------

const EnsembleStats& ReferenceStats::for_label(int label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return stats[i];
  }
  throw Error(Errc::invalid_argument, "reference stats have no entry for label " + std::to_string(label));
}

nlohmann::ordered_json to_json(const EnsembleStats& stats) {
  nlohmann::ordered_json cov = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < stats.covariance.rows(); ++r) cov.push_back(as_vector(stats.covariance.row(r).transpose()));
  return {{"count", stats.count}, {"mean", as_vector(stats.mean)}, {"covariance", cov}};
}

EnsembleStats stats_from_json(const nlohmann::ordered_json& j) {
  try {
    EnsembleStats s;
    s.count = j.at("count").get<std::size_t>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    if (cov.size() != mean.size()) throw Error(Errc::shape_mismatch, "covariance rows do not match the mean");
    s.covariance.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      if (cov[static_cast<std::size_t>(r)].size() != mean.size()) {
        throw Error(Errc::shape_mismatch, "covariance row " + std::to_string(r) + " has the wrong length");
      }
      for (Eigen::Index c = 0; c < d; ++c) s.covariance(r, c) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed ensemble stats: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const ReferenceStats& ref) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ref.labels.size(); ++i) {
    auto e = to_json(ref.stats[i]);
    e["label"] = ref.labels[i];
    entries.push_back(std::move(e));
  }
  nlohmann::ordered_json j{{"embedding", ref.embedding}, {"labels", entries}};
  if (ref.overall) j["overall"] = to_json(*ref.overall);
  return j;
}

ReferenceStats reference_stats_from_json(const nlohmann::ordered_json& j) {
  try {
    ReferenceStats ref;
    ref.embedding = j.value("embedding", "");
    for (const auto& e : j.at("labels")) {
      ref.labels.push_back(e.at("label").get<int>());
      ref.stats.push_back(stats_from_json(e));
      if (ref.stats.back().dim() != ref.stats.front().dim()) {
        throw Error(Errc::shape_mismatch, "reference stats mix feature dimensions");
      }
    }
    if (j.contains("overall")) ref.overall = stats_from_json(j.at("overall"));
    return ref;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed reference stats: ") + e.what());
  }
}

ReferenceStats load_reference_stats(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, path.string() + ": " + e.what());
  }
  return reference_stats_from_json(j);
}

// ---------------------------------------------------------------------------

ProbabilityMap pipeline_probabilities(const ModelGraph& graph, std::string pipeline) {
  const auto index = graph.find_pipeline(pipeline);
  if (!index) throw Error(Errc::dangling_reference, "no pipeline named '" + pipeline + "'");
  if (!graph.pipelines()[*index].probabilities) {
    throw Error(Errc::not_probabilities, "pipeline '" + pipeline + "' does not produce probabilities");
  }
  return [&graph, pipeline](std::span<const double> xi) {
    return graph.pipeline_value(pipeline, Tensor::vector(std::vector<double>(xi.begin(), xi.end())));
  };
}

ProbabilityMap network_probabilities(std::shared_ptr<const NetworkBundle> generator,
                                     std::shared_ptr<const NetworkBundle> classifier, std::size_t latent_offset) {
  if (!classifier) throw Error(Errc::invalid_argument, "classifier network is required");
  if (classifier->output_kind() != OutputKind::probabilities) {
    throw Error(Errc::not_probabilities, "network '" + classifier->name() + "' does not produce probabilities");
  }
  auto map = network_feature_map(std::move(generator), std::move(classifier), latent_offset);
  return [map](std::span<const double> xi) { return Tensor::vector(map(xi)); };
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::invalid_argument, "argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double constraint_accuracy(const SampleArchive& archive, const ProbabilityMap& decoder, std::size_t target) {
  const std::size_t n = archive.total_draws();
  if (n == 0) throw Error(Errc::invalid_argument, "archive has no retained draws");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor p = decoder(archive.draw(k));
    if (target >= p.size()) throw Error(Errc::index_out_of_bounds, "target class exceeds the decoder's classes");
    if (argmax(p.data()) == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<std::size_t> decode(const ModelGraph& graph, std::span<const std::string> pipelines,
                                std::span<const double> xi) {
  const Tensor x = Tensor::vector(std::vector<double>(xi.begin(), xi.end()));
  std::vector<std::size_t> out;
  out.reserve(pipelines.size());
  for (const auto& name : pipelines) out.push_back(argmax(graph.pipeline_value(name, x).data()));
  return out;
}

// ---------------------------------------------------------------------------

bool all_correct(const RiddleCheckpoint& checkpoint, std::span<const std::size_t> truth) {
  return !checkpoint.decoded.empty() && std::all_of(checkpoint.decoded.begin(), checkpoint.decoded.end(), [&](const auto& d) {
    return std::equal(d.begin(), d.end(), truth.begin(), truth.end());
  });
}

RiddleMetrics riddle_metrics(std::span<const RiddleRun> runs, std::span<const std::size_t> truth) {
  if (runs.empty()) throw Error(Errc::invalid_argument, "riddle metrics need at least one run");
  const RiddleRun& first = runs.front();
  if (first.checkpoints.empty()) throw Error(Errc::invalid_argument, "run has no checkpoints");
  const std::size_t t_count = first.checkpoints.size();
  for (const RiddleRun& run : runs) {
    bool same = run.checkpoints.size() == t_count && run.schedule.size() == first.schedule.size();
    for (std::size_t s = 0; same && s < run.schedule.size(); ++s) {
      same = run.schedule[s].alpha == first.schedule[s].alpha &&
             run.schedule[s].iterations == first.schedule[s].iterations;
    }
    for (std::size_t t = 0; same && t < t_count; ++t) {
      same = run.checkpoints[t].iter == first.checkpoints[t].iter &&
             run.checkpoints[t].stage_alpha == first.checkpoints[t].stage_alpha;
    }
    if (!same) throw Error(Errc::invalid_argument, "runs do not share a schedule (seed " + std::to_string(run.seed) + ")");
    for (const auto& cp : run.checkpoints) {
      if (cp.decoded.empty()) throw Error(Errc::invalid_argument, "checkpoint holds no samples");
      if (cp.scores.size() != cp.decoded.size()) throw Error(Errc::shape_mismatch, "scores do not match samples");
      for (const auto& d : cp.decoded) {
        if (d.size() != truth.size()) throw Error(Errc::shape_mismatch, "decoded tuple does not match the truth");
      }
    }
  }

  RiddleMetrics m;
  m.runs = runs.size();
  std::size_t start = 1;
  for (std::size_t s = 0; s + 1 < first.schedule.size(); ++s) {
    start += first.schedule[s].iterations;
    m.stage_boundaries.push_back(start);
  }
  const double inv_runs = 1.0 / static_cast<double>(runs.size());
  std::vector<char> any_seen(runs.size(), 0), all_seen(runs.size(), 0);
  bool with_likelihood = true;
  for (const RiddleRun& run : runs)
    for (const auto& cp : run.checkpoints) with_likelihood = with_likelihood && cp.truth_probability.size() == cp.decoded.size();
  for (std::size_t t = 0; t < t_count; ++t) {
    double elbo = 0.0, accuracy = 0.0, score = 0.0, likelihood = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const RiddleCheckpoint& cp = runs[r].checkpoints[t];
      std::size_t hits = 0;
      double total = 0.0;
      for (std::size_t k = 0; k < cp.decoded.size(); ++k) {
        if (std::equal(cp.decoded[k].begin(), cp.decoded[k].end(), truth.begin(), truth.end())) ++hits;
        total += cp.scores[k];
      }
      const double n = static_cast<double>(cp.decoded.size());
      elbo += cp.elbo_final_alpha * inv_runs;
      accuracy += static_cast<double>(hits) / n * inv_runs;
      score += total / n * inv_runs;
      if (with_likelihood) {
        double t_sum = 0.0;
        for (double p : cp.truth_probability) t_sum += p;
        likelihood += t_sum / n * inv_runs;
      }
      if (hits > 0) any_seen[r] = 1;
      if (hits == cp.decoded.size()) all_seen[r] = 1;
    }
    m.iter.push_back(first.checkpoints[t].iter);
    m.stage_alpha.push_back(first.checkpoints[t].stage_alpha);
    m.elbo_final_alpha.push_back(elbo);
    m.accuracy.push_back(std::clamp(accuracy, 0.0, 1.0));
    m.score.push_back(std::clamp(score, 0.0, 1.0));
    m.frac_any_correct.push_back(static_cast<double>(std::count(any_seen.begin(), any_seen.end(), 1)) * inv_runs);
    m.frac_all_correct.push_back(static_cast<double>(std::count(all_seen.begin(), all_seen.end(), 1)) * inv_runs);
    if (with_likelihood) m.truth_likelihood.push_back(std::clamp(likelihood, 0.0, 1.0));
  }
  std::size_t solved = 0;
  for (const RiddleRun& run : runs) solved += all_correct(run.checkpoints.back(), truth) ? 1 : 0;
  m.success_rate = static_cast<double>(solved) * inv_runs;
  return m;
}

nlohmann::ordered_json to_json(const RiddleRun& run) {
  nlohmann::ordered_json schedule = nlohmann::ordered_json::array();
  for (const auto& s : run.schedule) schedule.push_back({{"alpha", s.alpha}, {"iterations", s.iterations}});
  nlohmann::ordered_json checkpoints = nlohmann::ordered_json::array();
  for (const auto& cp : run.checkpoints) {
    nlohmann::ordered_json c{{"iter", cp.iter},
                             {"stage_alpha", cp.stage_alpha},
                             {"elbo_final_alpha", cp.elbo_final_alpha},
                             {"decoded", cp.decoded},
                             {"scores", cp.scores}};
    if (!cp.truth_probability.empty()) c["truth_probability"] = cp.truth_probability;
    checkpoints.push_back(std::move(c));
  }
  return {{"seed", run.seed}, {"schedule", schedule}, {"checkpoints", checkpoints}};
}

RiddleRun riddle_run_from_json(const nlohmann::ordered_json& j) {
  try {
    RiddleRun run;
    run.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("schedule")) {
      run.schedule.push_back({s.at("alpha").get<double>(), s.at("iterations").get<std::size_t>()});
    }
    for (const auto& c : j.at("checkpoints")) {
      RiddleCheckpoint cp;
      cp.iter = c.at("iter").get<std::size_t>();
      cp.stage_alpha = c.at("stage_alpha").get<double>();
      cp.elbo_final_alpha = c.at("elbo_final_alpha").get<double>();
      cp.decoded = c.at("decoded").get<std::vector<std::vector<std::size_t>>>();
      cp.scores = c.at("scores").get<std::vector<double>>();
      if (c.contains("truth_probability")) cp.truth_probability = c.at("truth_probability").get<std::vector<double>>();
      run.checkpoints.push_back(std::move(cp));
    }
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed riddle run: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const RiddleMetrics& m) {
  nlohmann::ordered_json j{{"runs", m.runs},
                                {"success_rate", m.success_rate},
                                {"stage_boundaries", m.stage_boundaries},
                                {"iter", m.iter},
                                {"stage_alpha", m.stage_alpha},
                                {"elbo_final_alpha", m.elbo_final_alpha},
                                {"accuracy", m.accuracy},
                                {"score", m.score},
                                {"frac_any_correct", m.frac_any_correct},
                                {"frac_all_correct", m.frac_all_correct}};
  if (!m.truth_likelihood.empty()) j["truth_likelihood"] = m.truth_likelihood;
  return j;
}

std::string to_csv(const RiddleMetrics& m) {
  auto num = [](double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  };
  const bool likelihood = !m.truth_likelihood.empty();
  std::string out = "iter,stage_alpha,elbo_final_alpha,accuracy,score,frac_any_correct,frac_all_correct";
  out += likelihood ? ",truth_likelihood\n" : "\n";
  for (std::size_t t = 0; t < m.iter.size(); ++t) {
    out += std::to_string(m.iter[t]) + ',' + num(m.stage_alpha[t]) + ',' + num(m.elbo_final_alpha[t]) + ',' +
           num(m.accuracy[t]) + ',' + num(m.score[t]) + ',' + num(m.frac_any_correct[t]) + ',' +
           num(m.frac_all_correct[t]);
    if (likelihood) out += ',' + num(m.truth_likelihood[t]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

RiddleRecorder::RiddleRecorder(const ModelGraph& graph, RiddleRecorderConfig config)
    : graph_(graph), config_(std::move(config)), rng_(mix_seed(config_.seed, 1)) {
  if (config_.n_samples == 0) throw Error(Errc::invalid_argument, "recorder needs at least one sample");
  if (config_.antithetic && config_.n_samples % 2 != 0) {
    throw Error(Errc::invalid_argument, "antithetic recording needs an even sample count");
  }
  for (const auto& name : config_.decode_pipelines) {
    if (!graph_.find_pipeline(name)) throw Error(Errc::dangling_reference, "no pipeline named '" + name + "'");
  }
  config_.schedule.validate();
  if (!config_.truth.empty() && config_.truth.size() != config_.decode_pipelines.size()) {
    throw Error(Errc::shape_mismatch, "truth needs one class per decoded pipeline");
  }
  run_.seed = config_.seed;
  run_.schedule = config_.schedule.stages;
}

RiddleCheckpoint RiddleRecorder::checkpoint(const VariationalState& state, const TraceRecord& record) {
  RiddleCheckpoint cp;
  cp.iter = record.iter;
  cp.stage_alpha = record.stage_alpha;
  cp.elbo_final_alpha = elbo_estimate(graph_, state, config_.elbo_pairs, rng_, config_.schedule.final_alpha()).value;
  const SampleArchive draws = sample_approximation(state, config_.n_samples, rng_, config_.antithetic);
  for (std::size_t k = 0; k < draws.total_draws(); ++k) {
    const auto xi = draws.draw(k);
    const Tensor x = Tensor::vector(std::vector<double>(xi.begin(), xi.end()));
    cp.decoded.push_back(decode(graph_, config_.decode_pipelines, xi));
    if (!config_.truth.empty()) {
      double p = 1.0;
      for (std::size_t j = 0; j < config_.truth.size(); ++j) {
        p *= graph_.pipeline_value(config_.decode_pipelines[j], x).data()[config_.truth[j]];
      }
      cp.truth_probability.push_back(p);
    }
    const auto probs = graph_.constraint_probabilities(x);
    double mean = 0.0;
    for (double p : probs) mean += p;
    cp.scores.push_back(probs.empty() ? 0.0 : mean / static_cast<double>(probs.size()));
  }
  return cp;
}

void RiddleRecorder::observe(const VariationalState& state, const TraceRecord& record) {
  run_.checkpoints.push_back(checkpoint(state, record));
}

std::function<void(const VariationalState&, const TraceRecord&)> RiddleRecorder::observer() {
  return [this](const VariationalState& state, const TraceRecord& record) { observe(state, record); };
}

RiddleRun RiddleRecorder::take() {
  RiddleRun out = std::move(run_);
  run_ = RiddleRun{config_.seed, config_.schedule.stages, {}};
  return out;
}

}  // namespace reasoner
