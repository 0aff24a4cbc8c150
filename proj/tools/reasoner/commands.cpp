#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include <reasoner/archive.hpp>
#include <reasoner/convergence.hpp>
#include <reasoner/diagnostics.hpp>
#include <reasoner/error.hpp>
#include <reasoner/hmc.hpp>
#include <reasoner/io.hpp>
#include <reasoner/model.hpp>
#include <reasoner/pgm.hpp>
#include <reasoner/vi.hpp>

#include "manifest.hpp"

namespace reasoner::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

template <class F>
auto load_input(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw InputError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(e.what());
  }
}

ModelGraph load_spec(const fs::path& path) {
  return load_input([&] { return compile_file(path); });
}

std::shared_ptr<const NetworkBundle> load_network(const fs::path& path) {
  return load_input([&] { return std::make_shared<const NetworkBundle>(load_bundle(path)); });
}

SampleArchive load_samples(const fs::path& path) {
  return load_input([&] { return load_archive(path); });
}

json load_json(const fs::path& path) {
  return load_input([&] { return json::parse(io::read_text(path)); });
}

Tensor as_tensor(std::span<const double> xi) { return Tensor::vector(std::vector<double>(xi.begin(), xi.end())); }

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ",") + i;
  return s;
}

/// Shape under which a pipeline value is rendered as an image.
std::optional<Shape> image_shape(const Shape& shape) {
  if (shape.size() == 2) return shape;
  if (shape.size() == 3 && shape[0] == 1) return Shape{shape[1], shape[2]};
  if (shape.size() == 1) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(shape[0]))));
    if (side * side == shape[0]) return Shape{side, side};
  }
  return std::nullopt;
}

const Pipeline& require_pipeline(const ModelGraph& graph, const std::string& name) {
  const auto index = graph.find_pipeline(name);
  if (!index) throw InputError("no pipeline named '" + name + "'");
  return graph.pipelines()[*index];
}

Shape require_image_pipeline(const ModelGraph& graph, const std::string& name) {
  const auto shape = image_shape(require_pipeline(graph, name).output_shape);
  if (!shape) throw InputError("pipeline '" + name + "' does not produce an image");
  return *shape;
}

std::uint64_t resolve_seed(const SampleOptions& options, const ModelGraph& graph) {
  if (options.seed) return *options.seed;
  if (graph.metadata().contains("seed")) return graph.metadata().at("seed").get<std::uint64_t>();
  return 0;
}

AnnealSchedule resolve_schedule(const std::string& text) {
  if (text == "riddle") return AnnealSchedule::riddle_default();
  return load_input([&] { return AnnealSchedule::parse(text); });
}

void check_sample_options(const SampleOptions& o, const ModelGraph& graph) {
  static const std::set<std::string> methods{"hmc", "mf-adam", "mf-linesearch"};
  if (!methods.contains(o.method)) throw InputError("unknown method '" + o.method + "'");
  if (o.out.empty()) throw InputError("--out is required");
  if (o.method == "hmc") {
    if (o.seeds != 1) throw InputError("--seeds applies to mean-field methods only");
    if (o.chains == 0 || o.draws == 0) throw InputError("--chains and --draws must be positive");
    if (o.leapfrog == 0) throw InputError("--leapfrog must be positive");
    if (!(o.target_acceptance > 0.0 && o.target_acceptance < 1.0)) throw InputError("--target-acceptance must be in (0, 1)");
  } else {
    if (o.samples == 0 || o.pairs == 0) throw InputError("--samples and --pairs must be positive");
    if (o.antithetic && o.samples % 2 != 0) throw InputError("--antithetic needs an even --samples");
    if (o.seeds == 0) throw InputError("--seeds must be positive");
    if (!(o.eta > 0.0)) throw InputError("--eta must be positive");
    if (!(o.tail_average >= 0.0 && o.tail_average <= 1.0)) throw InputError("--tail-average must be in [0, 1]");
  }
  for (const auto& name : o.decode) {
    if (!require_pipeline(graph, name).probabilities) throw InputError("pipeline '" + name + "' does not produce probabilities");
  }
  if (!o.truth.empty() && o.truth.size() != o.decode.size()) throw InputError("--truth needs one class per --decode pipeline");
  for (const auto& name : o.pgm) require_image_pipeline(graph, name);
}

json config_json(const SampleOptions& o, std::uint64_t seed) {
  json c{{"method", o.method}, {"seed", seed}};
  if (o.method == "hmc") {
    c["chains"] = o.chains;
    c["draws_per_chain"] = o.draws;
    c["warmup"] = o.warmup;
    c["leapfrog"] = o.leapfrog;
    c["target_acceptance"] = o.target_acceptance;
  } else {
    c["seeds"] = o.seeds;
    c["schedule"] = o.schedule;
    c["samples"] = o.samples;
    c["antithetic"] = o.antithetic;
    c["pairs"] = o.pairs;
    if (o.method == "mf-adam") c["eta"] = o.eta;
    c["tail_average"] = o.tail_average;
  }
  if (!o.decode.empty()) c["decode"] = o.decode;
  if (!o.truth.empty()) c["truth"] = o.truth;
  return c;
}

// --- runs -------------------------------------------------------------------

struct DecodeSummary {
  double accuracy = 0.0;
  bool all_correct = false;
};

DecodeSummary decode_archive(const ModelGraph& graph, const std::vector<std::string>& pipelines,
                             const std::vector<std::size_t>& truth, const SampleArchive& archive) {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < archive.total_draws(); ++k) {
    if (decode(graph, pipelines, archive.draw(k)) == truth) ++hits;
  }
  const double n = static_cast<double>(archive.total_draws());
  return {static_cast<double>(hits) / n, hits == archive.total_draws()};
}

void dump_images(Manifest& manifest, const fs::path& dir, const ModelGraph& graph,
                 const std::vector<std::string>& pipelines, const SampleArchive& archive, std::size_t count) {
  // Evenly spaced over all retained draws, so images span chains and skip runs of rejections.
  const std::size_t total = archive.total_draws(), n = std::min(count, total);
  for (const auto& name : pipelines) {
    const Shape shape = require_image_pipeline(graph, name);
    for (std::size_t k = 0; k < n; ++k) {
      const Tensor image = graph.pipeline_value(name, as_tensor(archive.draw(k * total / n))).reshaped(shape);
      manifest.write(dir / "images" / (name + "-" + std::to_string(k) + ".pgm"), encode_pgm(image));
    }
  }
}

json hmc_metrics(const HmcResult& r) {
  json chains = json::array();
  for (const auto& c : r.chains) {
    chains.push_back({{"step_size", c.step_size},
                      {"acceptance", c.acceptance_rate()},
                      {"divergent", c.divergent},
                      {"proposed", c.proposed}});
  }
  json j{{"method", "hmc"}, {"chains", chains}};
  if (r.archive.n_chains >= 2 && r.archive.n_draws >= 10) {
    const auto rhat = gelman_rubin(r.archive);
    j["rhat"] = {{"mean", rhat.mean}, {"per_coordinate", rhat.per_coordinate}};
  }
  if (r.archive.n_draws >= 4) {
    const auto ess = effective_sample_size(r.archive);
    j["ess"] = {{"mean", ess.mean},
                {"min", *std::min_element(ess.per_coordinate.begin(), ess.per_coordinate.end())},
                {"per_coordinate", ess.per_coordinate}};
  }
  return j;
}

HmcResult run_hmc(const ModelGraph& graph, const SampleOptions& o, std::uint64_t seed) {
  HmcConfig config;
  config.n_chains = o.chains;
  config.n_samples = o.chains * o.draws;
  config.leapfrog_steps = o.leapfrog;
  config.target_acceptance = o.target_acceptance;
  config.warmup_iterations = o.warmup;
  config.master_seed = seed;
  return sample_hmc(graph, config);
}

struct ViRun {
  std::uint64_t seed = 0;
  ViResult result;
  SampleArchive archive;
  std::optional<RiddleRun> riddle;
  std::optional<std::string> aborted;
};

ViRun run_vi(const ModelGraph& graph, const SampleOptions& o, const AnnealSchedule& schedule, std::uint64_t seed) {
  ViRun run;
  run.seed = seed;
  ViConfig config;
  config.seed = seed;
  config.n_pairs = o.pairs;
  config.eta = o.eta;
  config.tail_average = o.tail_average;
  std::optional<RiddleRecorder> recorder;
  if (!o.decode.empty() && o.observe_every > 0) {
    recorder.emplace(graph, RiddleRecorderConfig{o.decode, schedule, o.truth, o.record_samples, o.record_samples % 2 == 0, o.pairs, seed});
    config.observe_every = o.observe_every;
    config.observer = recorder->observer();
  }
  try {
    run.result = o.method == "mf-adam" ? fit_adam(graph, schedule, config) : fit_linesearch(graph, schedule, config);
  } catch (const ViAborted& e) {
    run.result.trace = e.trace();
    run.aborted = e.what();
    return run;
  }
  Rng rng(mix_seed(seed, 3));
  run.archive = sample_approximation(run.result.state, o.samples, rng, o.antithetic);
  run.archive.master_seed = seed;
  run.archive.created_by = "reasoner " + o.method;
  if (recorder) run.riddle = recorder->take();
  return run;
}

json vi_metrics(const ViRun& run, const SampleOptions& o) {
  const auto& trace = run.result.trace;
  std::size_t skipped = 0;
  for (const auto& r : trace) skipped += r.skipped ? 1 : 0;
  json j{{"method", o.method}, {"seed", run.seed}, {"iterations", trace.size()}};
  if (run.aborted) {
    j["aborted"] = *run.aborted;
    return j;
  }
  j["final_elbo_estimate"] = trace.empty() ? 0.0 : trace.back().elbo_estimate;
  j["kl_to_prior"] = kl_to_prior(run.result.state);
  if (o.method == "mf-linesearch") j["skipped_steps"] = skipped;
  return j;
}

void write_vi_run(Manifest& manifest, const fs::path& dir, const ModelGraph& graph, const ViRun& run,
                  const SampleOptions& o, json& metrics) {
  manifest.write(dir / "trace.jsonl", to_jsonl(run.result.trace));
  if (run.aborted) return;
  manifest.write(dir / "samples.nsa", serialize_archive(run.archive));
  json state{{"mean", run.result.state.mean}, {"log_std", run.result.state.log_std}};
  manifest.write(dir / "state.json", state.dump(2) + "\n");
  if (!o.decode.empty() && !o.truth.empty()) {
    const auto d = decode_archive(graph, o.decode, o.truth, run.archive);
    metrics["archive_decoded_accuracy"] = d.accuracy;
    metrics["archive_all_correct"] = d.all_correct;
  }
  dump_images(manifest, dir, graph, o.pgm, run.archive, o.pgm_count);
}

std::vector<ViRun> run_vi_seeds(const ModelGraph& graph, const SampleOptions& o, const AnnealSchedule& schedule,
                                std::uint64_t first_seed) {
  std::vector<ViRun> runs(o.seeds);
  parallel_for(o.seeds, [&](std::size_t i) { runs[i] = run_vi(graph, o, schedule, first_seed + i); });
  return runs;
}

int sample_into(Manifest& manifest, const fs::path& dir, const ModelGraph& graph, const SampleOptions& o,
                std::uint64_t seed, std::ostream& out, std::optional<SampleArchive>* archive_out = nullptr,
                std::optional<VariationalState>* state_out = nullptr) {
  if (o.method == "hmc") {
    HmcResult r = run_hmc(graph, o, seed);
    manifest.write(dir / "samples.nsa", serialize_archive(r.archive));
    json metrics = hmc_metrics(r);
    manifest.write(dir / "metrics.json", metrics.dump(2) + "\n");
    dump_images(manifest, dir, graph, o.pgm, r.archive, o.pgm_count);
    out << "hmc: " << r.archive.n_chains << " chains x " << r.archive.n_draws << " draws";
    if (metrics.contains("rhat")) out << ", mean R-hat " << metrics["rhat"]["mean"].dump();
    out << "\n";
    if (archive_out) *archive_out = std::move(r.archive);
    return kExitOk;
  }

  const AnnealSchedule schedule = resolve_schedule(o.schedule);
  std::vector<ViRun> runs = run_vi_seeds(graph, o, schedule, seed);
  int status = kExitOk;
  if (runs.size() == 1) {
    const ViRun& run = runs.front();
    json metrics = vi_metrics(run, o);
    write_vi_run(manifest, dir, graph, run, o, metrics);
    manifest.write(dir / "metrics.json", metrics.dump(2) + "\n");
    if (run.riddle) {
      json doc{{"decode", o.decode}, {"truth", o.truth}, {"runs", json::array({to_json(*run.riddle)})}};
      manifest.write(dir / "riddle_runs.json", doc.dump() + "\n");
    }
    if (run.aborted) throw Error(Errc::divergence, *run.aborted);
    out << o.method << ": " << run.result.trace.size() << " iterations, final ELBO estimate "
        << metrics["final_elbo_estimate"].dump() << "\n";
    if (archive_out) *archive_out = run.archive;
    if (state_out) *state_out = run.result.state;
    return status;
  }

  json summary = json::array();
  std::vector<RiddleRun> riddles;
  std::size_t solved = 0;
  for (const ViRun& run : runs) {
    json metrics = vi_metrics(run, o);
    write_vi_run(manifest, dir / "runs" / ("seed-" + std::to_string(run.seed)), graph, run, o, metrics);
    if (run.aborted) status = kExitRuntime;
    if (metrics.value("archive_all_correct", false)) ++solved;
    if (run.riddle) riddles.push_back(*run.riddle);
    summary.push_back(std::move(metrics));
  }
  json report{{"runs", runs.size()}};
  std::optional<RiddleMetrics> riddle;
  if (!o.truth.empty() && !riddles.empty() && riddles.size() == runs.size()) riddle = riddle_metrics(riddles, o.truth);
  // Success is judged on the last checkpoint ensemble when one was recorded,
  // else on every archived draw.
  if (riddle) {
    report["success_rate"] = riddle->success_rate;
  } else if (!o.truth.empty()) {
    report["success_rate"] = static_cast<double>(solved) / static_cast<double>(runs.size());
  }
  if (!o.truth.empty() && !o.decode.empty()) {
    report["archive_all_correct_rate"] = static_cast<double>(solved) / static_cast<double>(runs.size());
  }
  report["per_seed"] = summary;
  manifest.write(dir / "metrics.json", report.dump(2) + "\n");
  if (!riddles.empty()) {
    json doc{{"decode", o.decode}, {"truth", o.truth}, {"runs", json::array()}};
    for (const auto& r : riddles) doc["runs"].push_back(to_json(r));
    manifest.write(dir / "riddle_runs.json", doc.dump() + "\n");
  }
  if (riddle) {
    manifest.write(dir / "riddle_metrics.json", to_json(*riddle).dump(2) + "\n");
    manifest.write(dir / "riddle_metrics.csv", to_csv(*riddle));
  }
  out << o.method << ": " << runs.size() << " seeds";
  if (report.contains("success_rate")) out << ", success rate " << report["success_rate"].dump();
  out << "\n";
  return status;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- reconstruct ------------------------------------------------------------

struct ImageMoments {
  Tensor mean;
  Tensor variance;
};

ImageMoments image_moments(const ModelGraph& graph, const std::string& name, const Shape& shape,
                           const SampleArchive& archive, const std::optional<VariationalState>& state) {
  const std::size_t n = archive.total_draws();
  const std::size_t size = element_count(shape);
  std::vector<double> sum(size, 0.0), sum_sq(size, 0.0);
  std::vector<std::vector<double>> values;
  for (std::size_t k = 0; k < n; ++k) values.push_back(graph.pipeline_value(name, as_tensor(archive.draw(k))).to_vector());
  for (const auto& v : values)
    for (std::size_t i = 0; i < size; ++i) sum[i] += v[i];
  std::vector<double> mean(size), var(size, 0.0);
  for (std::size_t i = 0; i < size; ++i) mean[i] = sum[i] / static_cast<double>(n);
  for (const auto& v : values)
    for (std::size_t i = 0; i < size; ++i) sum_sq[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
  if (n > 1)
    for (std::size_t i = 0; i < size; ++i) var[i] = sum_sq[i] / static_cast<double>(n - 1);
  if (state) mean = graph.pipeline_value(name, Tensor::vector(state->mean)).to_vector();
  return {Tensor::vector(std::move(mean)).reshaped(shape), Tensor::vector(std::move(var)).reshaped(shape)};
}

std::vector<double> point_estimate(const SampleArchive& archive, const std::optional<VariationalState>& state) {
  if (state) return state->mean;
  std::vector<double> mean(archive.dim, 0.0);
  for (std::size_t k = 0; k < archive.total_draws(); ++k) {
    const auto row = archive.draw(k);
    for (std::size_t i = 0; i < archive.dim; ++i) mean[i] += row[i] / static_cast<double>(archive.total_draws());
  }
  return mean;
}

json residual_report(const ModelGraph& graph, std::span<const double> xi) {
  const Tensor x = as_tensor(xi);
  const auto probabilities = graph.constraint_probabilities(x);
  json terms = json::array();
  std::size_t tempered = 0;
  for (const auto& term : graph.terms()) {
    json t{{"label", term.label}, {"kind", std::string(to_string(term.kind))}};
    if (term.kind == TermKind::gaussian) {
      const Tensor value = graph.pipeline_value(graph.pipelines()[term.inputs[0]].name, x);
      double sq = 0.0, chi2 = 0.0;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double r = term.target.data()[i] - value.data()[i];
        sq += r * r;
        chi2 += term.inverse_noise.data()[i] * r * r;
      }
      const double n = static_cast<double>(value.size());
      t["rms_residual"] = std::sqrt(sq / n);
      t["chi2_per_value"] = chi2 / n;
    } else {
      t["probability"] = probabilities[tempered++];
    }
    terms.push_back(std::move(t));
  }
  return terms;
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.size());
}

// --- report -----------------------------------------------------------------

std::vector<std::size_t> parse_truth(const json& j) { return j.get<std::vector<std::size_t>>(); }

}  // namespace

int cmd_validate(const ValidateOptions& options, std::ostream& out) {
  const ModelGraph graph = load_spec(options.spec);
  std::set<const NetworkBundle*> seen;
  bool fixtures_ok = true;
  for (const auto& p : graph.pipelines()) {
    for (const auto& stage : p.stages) {
      if (!stage.network || !seen.insert(stage.network.get()).second) continue;
      for (const auto& check : verify_fixtures(*stage.network)) {
        if (!check.passed) {
          fixtures_ok = false;
          out << options.spec.generic_string() << ": network '" << stage.network->name() << "' fixture "
              << check.index << " off by " << check.max_error << "\n";
        }
      }
    }
  }
  if (!fixtures_ok) throw InputError("bundle fixtures do not reproduce");
  out << options.spec.generic_string() << ": valid\n";
  for (const auto& l : graph.latents()) out << "  latent " << l.name << " [" << l.dim << "]\n";
  for (const auto& p : graph.pipelines()) out << "  pipeline " << p.name << " -> " << to_string(p.output_shape) << "\n";
  for (const auto& t : graph.terms()) {
    out << "  constraint " << t.label << " (" << to_string(t.kind);
    if (t.tempered()) out << ", alpha " << t.alpha;
    out << ")\n";
  }
  out << "  networks verified: " << seen.size() << "\n";
  return kExitOk;
}

int cmd_sample(const SampleOptions& options, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelGraph graph = load_spec(options.spec);
  check_sample_options(options, graph);
  const std::uint64_t seed = resolve_seed(options, graph);
  if (options.method != "hmc") resolve_schedule(options.schedule);

  Manifest manifest("sample", options.out);
  manifest.add_input("spec", options.spec);
  manifest.config() = config_json(options, seed);
  int status = kExitOk;
  try {
    status = sample_into(manifest, "", graph, options, seed, out);
  } catch (...) {
    manifest.config()["status"] = "aborted";
    manifest.finish(options.record_timing ? std::optional(seconds_since(t0)) : std::nullopt);
    throw;
  }
  manifest.finish(options.record_timing ? std::optional(seconds_since(t0)) : std::nullopt);
  return status;
}

int cmd_reconstruct(const ReconstructOptions& options, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const SampleOptions& o = options.sample;
  if (options.image.empty()) throw InputError("--image is required");
  if (o.seeds != 1) throw InputError("reconstruct runs a single seed");
  std::vector<std::pair<std::string, fs::path>> specs{{"primary", o.spec}};
  if (options.compare) specs.emplace_back("compare", *options.compare);

  std::vector<ModelGraph> graphs;
  for (const auto& [label, path] : specs) {
    graphs.push_back(load_spec(path));
    check_sample_options(o, graphs.back());
    require_image_pipeline(graphs.back(), options.image);
  }
  const std::uint64_t seed = resolve_seed(o, graphs.front());
  if (o.method != "hmc") resolve_schedule(o.schedule);

  Manifest manifest("reconstruct", o.out);
  for (const auto& [label, path] : specs) manifest.add_input(label, path);
  manifest.config() = config_json(o, seed);
  manifest.config()["image"] = options.image;

  json comparison{{"image", options.image}};
  std::vector<ImageMoments> moments;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const ModelGraph& graph = graphs[s];
    const fs::path dir = specs.size() > 1 ? fs::path(specs[s].first) : fs::path();
    std::optional<SampleArchive> archive;
    std::optional<VariationalState> state;
    out << specs[s].first << ": ";
    sample_into(manifest, dir, graph, o, seed, out, &archive, &state);

    const Shape shape = require_image_pipeline(graph, options.image);
    ImageMoments m = image_moments(graph, options.image, shape, *archive, state);
    manifest.write(dir / "mean.pgm", encode_pgm(m.mean));
    manifest.write(dir / "variance.pgm", encode_pgm(m.variance));
    json image{{"shape", shape}, {"mean", m.mean.to_vector()}, {"variance", m.variance.to_vector()}};
    manifest.write(dir / "image.json", image.dump() + "\n");
    const json residuals = residual_report(graph, point_estimate(*archive, state));
    manifest.write(dir / "residuals.json", residuals.dump(2) + "\n");
    comparison[specs[s].first] = {{"mean_variance", mean_of(m.variance)}, {"terms", residuals}};
    moments.push_back(std::move(m));
  }
  if (moments.size() == 2) {
    double sq = 0.0;
    for (std::size_t i = 0; i < moments[0].mean.size(); ++i) {
      const double d = moments[0].mean.data()[i] - moments[1].mean.data()[i];
      sq += d * d;
    }
    comparison["mean_image_rms_difference"] = std::sqrt(sq / static_cast<double>(moments[0].mean.size()));
    manifest.write("comparison.json", comparison.dump(2) + "\n");
  }
  manifest.finish(o.record_timing ? std::optional(seconds_since(t0)) : std::nullopt);
  return kExitOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  static const std::set<std::string> known{"acc", "fid", "riddle"};
  if (o.metrics.empty()) throw InputError("--metrics is empty");
  for (const auto& m : o.metrics) {
    if (!known.contains(m)) throw InputError("unknown metric '" + m + "'");
  }
  auto wants = [&](const char* m) { return std::find(o.metrics.begin(), o.metrics.end(), m) != o.metrics.end(); };

  std::optional<SampleArchive> archive;
  std::optional<ModelGraph> graph;
  if (o.archive) archive = load_samples(*o.archive);
  if (o.spec) graph = load_spec(*o.spec);
  if (archive && graph && archive->dim != graph->dim()) {
    throw InputError("archive dimension " + std::to_string(archive->dim) + " does not match the problem spec's " +
                     std::to_string(graph->dim()));
  }
  if ((wants("acc") || wants("fid")) && !archive) throw InputError("acc and fid need an archive");
  if (!o.image.empty()) {
    if (!graph) throw InputError("--image needs a spec");
    require_image_pipeline(*graph, o.image);
  }

  // Image source for networks applied outside the problem spec.
  std::shared_ptr<const NetworkBundle> generator;
  if (o.generator) generator = load_network(*o.generator);
  auto image_then = [&](std::shared_ptr<const NetworkBundle> net) -> FeatureMap {
    if (!o.image.empty()) {
      const ModelGraph* g = &*graph;
      const std::string image = o.image;
      if (g->pipelines()[*g->find_pipeline(image)].output_shape != net->input_shape() &&
          element_count(g->pipelines()[*g->find_pipeline(image)].output_shape) != element_count(net->input_shape())) {
        throw InputError("pipeline '" + image + "' does not feed network '" + net->name() + "'");
      }
      return [g, image, net](std::span<const double> xi) {
        return net->forward(g->pipeline_value(image, as_tensor(xi)).reshaped(net->input_shape())).to_vector();
      };
    }
    return load_input([&] { return network_feature_map(generator, net, o.latent_offset); });
  };

  json report = json::object();
  std::vector<std::pair<fs::path, std::string>> extra;

  if (wants("acc")) {
    if (!o.target) throw InputError("acc needs --target");
    json acc{{"target", *o.target}};
    if (!o.pipeline.empty()) {
      if (!graph) throw InputError("--pipeline needs a spec");
      const auto decoder = load_input([&] { return pipeline_probabilities(*graph, o.pipeline); });
      acc["in_model"] = load_input([&] { return constraint_accuracy(*archive, decoder, *o.target); });
    }
    if (o.classifier) {
      const auto classifier = load_network(*o.classifier);
      if (classifier->output_kind() != OutputKind::probabilities) throw InputError("classifier must output probabilities");
      const FeatureMap map = image_then(classifier);
      const ProbabilityMap decoder = [map](std::span<const double> xi) { return Tensor::vector(map(xi)); };
      acc["independent"] = load_input([&] { return constraint_accuracy(*archive, decoder, *o.target); });
    }
    if (acc.size() == 1) throw InputError("acc needs --pipeline or --classifier");
    report["acc"] = acc;
  }

  if (wants("fid")) {
    if (!o.embedding) throw InputError("fid needs --embedding");
    const FeatureMap features = image_then(load_network(*o.embedding));
    const EnsembleStats stats = load_input([&] { return embed_ensemble(*archive, features); });
    EnsembleStats reference;
    if (o.reference_archive) {
      reference = load_input([&] { return embed_ensemble(load_samples(*o.reference_archive), features); });
    } else if (o.reference) {
      const ReferenceStats ref = load_input([&] { return load_reference_stats(*o.reference); });
      if (o.label) {
        reference = load_input([&] { return ref.for_label(*o.label); });
      } else if (ref.overall) {
        reference = *ref.overall;
      } else {
        throw InputError("reference stats have no overall entry; pass --label");
      }
    } else {
      throw InputError("fid needs --reference or --reference-archive");
    }
    json fid{{"value", load_input([&] { return frechet_distance(stats, reference); })}, {"count", stats.count}};
    if (archive->n_warmup >= 2) {
      const auto series = load_input([&] { return warmup_fid_series(*archive, features, reference, o.fid_stride, o.fid_window); });
      std::string csv = "chain,iteration,cumulative,sliding\n";
      json chains = json::array();
      for (const auto& s : series) {
        json points = json::array();
        for (const auto& p : s.points) {
          points.push_back({{"iteration", p.iteration}, {"cumulative", p.cumulative}, {"sliding", p.sliding}});
          csv += std::to_string(s.chain) + ',' + std::to_string(p.iteration) + ',' + json(p.cumulative).dump() + ',' +
                 json(p.sliding).dump() + '\n';
        }
        chains.push_back({{"chain", s.chain}, {"points", points}});
      }
      fid["warmup"] = {{"stride", o.fid_stride}, {"window", o.fid_window}, {"chains", chains}};
      extra.emplace_back("fid_warmup.csv", csv);
    }
    report["fid"] = fid;
  }

  if (wants("riddle")) {
    if (!o.runs) throw InputError("riddle needs --runs");
    const json doc = load_json(*o.runs);
    const RiddleMetrics m = load_input([&] {
      std::vector<RiddleRun> runs;
      for (const auto& r : doc.at("runs")) runs.push_back(riddle_run_from_json(r));
      const std::vector<std::size_t> truth = o.truth.empty() ? parse_truth(doc.at("truth")) : o.truth;
      return riddle_metrics(runs, truth);
    });
    report["riddle"] = to_json(m);
    extra.emplace_back("riddle.csv", to_csv(m));
  }

  const std::string text = report.dump(2) + "\n";
  out << text;
  if (o.out) {
    Manifest manifest("report", *o.out);
    if (o.archive) manifest.add_input("archive", *o.archive);
    if (o.spec) manifest.add_input("spec", *o.spec);
    if (o.runs) manifest.add_input("runs", *o.runs);
    manifest.config() = {{"metrics", join(o.metrics)}};
    manifest.write("report.json", text);
    for (const auto& [name, body] : extra) manifest.write(name, body);
    manifest.finish();
  }
  return kExitOk;
}

}  // namespace reasoner::cli
