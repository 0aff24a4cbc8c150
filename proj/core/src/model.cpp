#include "reasoner/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "reasoner/error.hpp"
#include "reasoner/io.hpp"

namespace reasoner {

using nlohmann::json;

std::string_view to_string(TermKind kind) {
  switch (kind) {
    case TermKind::gaussian: return "gaussian";
    case TermKind::categorical: return "categorical";
    case TermKind::logic: return "logic";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelGraph

ModelGraph::ModelGraph(std::vector<LatentBlock> latents, std::vector<Pipeline> pipelines,
                       std::vector<LikelihoodTerm> terms, json metadata)
    : latents_(std::move(latents)),
      pipelines_(std::move(pipelines)),
      terms_(std::move(terms)),
      metadata_(std::move(metadata)) {
  for (const auto& b : latents_) {
    if (b.offset != dim_) throw Error(Errc::invalid_argument, "latent blocks must be contiguous in declaration order");
    dim_ += b.dim;
  }
  if (dim_ == 0) throw Error(Errc::invalid_argument, "model has no latent dimensions");
}

void ModelGraph::check_input(std::span<const double> xi) const {
  if (xi.size() != dim_) {
    throw Error(Errc::shape_mismatch,
                "latent vector has " + std::to_string(xi.size()) + " entries, model expects " + std::to_string(dim_));
  }
  for (double v : xi)
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "latent vector contains a non-finite entry");
}

std::vector<Var> ModelGraph::evaluate(const Var& xi) const {
  std::vector<Var> values;
  values.reserve(pipelines_.size());
  for (const Pipeline& p : pipelines_) {
    Var h = p.from_latent ? slice(xi, latents_[p.source].offset, latents_[p.source].dim) : values[p.source];
    for (const Stage& s : p.stages) {
      switch (s.kind) {
        case Stage::Kind::network: h = s.network->forward(h); break;
        case Stage::Kind::degrade: h = s.op->apply(h); break;
        case Stage::Kind::expectation: h = matvec(Var(s.weights), h); break;
        case Stage::Kind::softmax: h = softmax(h); break;
        case Stage::Kind::reshape: h = reshape(h, s.shape); break;
      }
    }
    values.push_back(std::move(h));
  }
  return values;
}

Var ModelGraph::term_value(const LikelihoodTerm& term, const std::vector<Var>& values, double alpha_scale) const {
  switch (term.kind) {
    case TermKind::gaussian: {
      const Var& out = values[term.inputs[0]];
      Var residual = sub(reshape(out, Shape{out.size()}), Var(term.target));
      Var chi2 = sum(mul(mul(residual, residual), Var(term.inverse_noise)));
      return add(mul(chi2, -0.5), term.log_normalizer);
    }
    case TermKind::categorical: {
      Var p = slice(values[term.inputs[0]], term.target_class, 1);
      return mul(sum(log(p, kProbabilityFloor)), term.alpha * alpha_scale);
    }
    case TermKind::logic: {
      std::vector<Var> probs;
      for (auto i : term.inputs) probs.push_back(values[i]);
      Var c = term.logic->contract(probs);
      return mul(log(c, kProbabilityFloor), term.alpha * alpha_scale);
    }
  }
  throw Error(Errc::invalid_argument, "unknown term kind");
}

double ModelGraph::log_likelihood(std::span<const double> xi, double alpha_scale, std::span<double> grad) const {
  check_input(xi);
  if (terms_.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.0;
  }
  Tensor point = Tensor::vector(std::vector<double>(xi.begin(), xi.end()));
  if (grad.empty()) {
    auto values = evaluate(Var(point));
    double total = 0.0;
    for (const auto& t : terms_) total += term_value(t, values, alpha_scale).value().item();
    return total;
  }
  if (grad.size() != dim_) throw Error(Errc::shape_mismatch, "gradient buffer has the wrong size");
  Tape tape;
  Var x = tape.input(point);
  auto values = evaluate(x);
  Var total = term_value(terms_[0], values, alpha_scale);
  for (std::size_t i = 1; i < terms_.size(); ++i) total = add(total, term_value(terms_[i], values, alpha_scale));
  const double value = total.value().item();
  auto g = tape.gradient(total);
  auto gs = g.at(0).data();
  std::copy(gs.begin(), gs.end(), grad.begin());
  return value;
}

double ModelGraph::log_density(const Tensor& xi) const { return LatentPosterior::log_density(xi.data()); }

Tensor ModelGraph::grad_log_density(const Tensor& xi) const {
  std::vector<double> g(dim_, 0.0);
  LatentPosterior::log_density(xi.data(), g);
  return Tensor::vector(std::move(g));
}

std::vector<double> ModelGraph::term_log_densities(const Tensor& xi, double alpha_scale) const {
  check_input(xi.data());
  auto values = evaluate(Var(xi.reshaped(Shape{dim_})));
  std::vector<double> out;
  for (const auto& t : terms_) out.push_back(term_value(t, values, alpha_scale).value().item());
  return out;
}

std::vector<double> ModelGraph::constraint_probabilities(const Tensor& xi) const {
  check_input(xi.data());
  auto values = evaluate(Var(xi.reshaped(Shape{dim_})));
  std::vector<double> out;
  for (const auto& t : terms_) {
    if (t.kind == TermKind::categorical) {
      out.push_back(values[t.inputs[0]].value()[t.target_class]);
    } else if (t.kind == TermKind::logic) {
      std::vector<Tensor> probs;
      for (auto i : t.inputs) probs.push_back(values[i].value());
      out.push_back(contract_logic(*t.logic, probs));
    }
  }
  return out;
}

std::optional<std::size_t> ModelGraph::find_pipeline(std::string_view name) const {
  for (std::size_t i = 0; i < pipelines_.size(); ++i)
    if (pipelines_[i].name == name) return i;
  return std::nullopt;
}

Tensor ModelGraph::pipeline_value(std::string_view name, const Tensor& xi) const {
  auto idx = find_pipeline(name);
  if (!idx) throw Error(Errc::dangling_reference, "unknown pipeline '" + std::string(name) + "'");
  check_input(xi.data());
  return evaluate(Var(xi.reshaped(Shape{dim_})))[*idx].value();
}

// ---------------------------------------------------------------------------
// Spec compiler

namespace {

[[noreturn]] void fail(Errc code, const std::string& where, const std::string& what) {
  throw Error(code, where + ": " + what);
}

void require_object(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(Errc::invalid_spec, where, "expected an object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      fail(Errc::invalid_spec, where, "unknown key '" + item.key() + "'");
    }
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(Errc::invalid_spec, where, "missing required key '" + key + "'");
  return *it;
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string() || v.get<std::string>().empty()) fail(Errc::invalid_spec, where + "/" + key, "expected a non-empty string");
  return v.get<std::string>();
}

std::size_t get_positive(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) fail(Errc::invalid_spec, where, "expected a positive integer");
  return v.get<std::size_t>();
}

std::size_t get_index(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(Errc::invalid_spec, where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double get_positive_real(const json& v, const std::string& where) {
  if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() <= 0.0) {
    fail(Errc::invalid_spec, where, "expected a positive number, got " + v.dump());
  }
  return v.get<double>();
}

const json& get_array(const json& obj, const std::string& key, const std::string& where, bool required) {
  static const json kEmpty = json::array();
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(Errc::invalid_spec, where, "missing required key '" + key + "'");
    return kEmpty;
  }
  if (!it->is_array()) fail(Errc::invalid_spec, where + "/" + key, "expected an array");
  return *it;
}

Shape get_shape(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(Errc::invalid_spec, where, "expected a non-empty array of positive integers");
  Shape s;
  for (std::size_t i = 0; i < v.size(); ++i) s.push_back(get_positive(v[i], where + "/" + std::to_string(i)));
  return s;
}

void flatten_numbers(const json& v, std::vector<double>& out, const std::string& where) {
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& e : v) flatten_numbers(e, out, where);
  } else {
    fail(Errc::invalid_spec, where, "expected numbers or nested arrays of numbers");
  }
}

std::vector<double> get_numbers(const json& v, const std::string& where, const std::filesystem::path& base) {
  std::vector<double> out;
  if (v.is_object()) {
    require_object(v, where, {"file"});
    const std::filesystem::path file = base / get_string(v, "file", where);
    json data;
    try {
      data = json::parse(io::read_text(file));
    } catch (const Error&) {
      fail(Errc::invalid_spec, where + "/file", "cannot read data file " + file.string());
    } catch (const json::exception& e) {
      fail(Errc::invalid_spec, where + "/file", "data file " + file.string() + " is not valid JSON: " + e.what());
    }
    if (data.is_object() && data.contains("data")) data = data["data"];
    flatten_numbers(data, out, where + "/file");
  } else {
    flatten_numbers(v, out, where);
  }
  for (double x : out)
    if (!std::isfinite(x)) fail(Errc::invalid_spec, where, "contains a non-finite value");
  return out;
}

struct PendingPipeline {
  Pipeline pipeline;
  json stages;
  std::string where;
};

class Compiler {
 public:
  Compiler(const json& spec, const CompileOptions& options) : spec_(spec), options_(options) {}

  ModelGraph run() {
    require_object(spec_, "", {"latents", "networks", "pipelines", "constraints", "metadata"});
    parse_latents();
    parse_networks();
    parse_pipelines();
    parse_constraints();
    json metadata = json::object();
    if (auto it = spec_.find("metadata"); it != spec_.end()) {
      require_object(*it, "/metadata", {"seed", "description"});
      if (it->contains("seed") && !(*it)["seed"].is_number_unsigned()) {
        fail(Errc::invalid_spec, "/metadata/seed", "expected a non-negative integer");
      }
      if (it->contains("description") && !(*it)["description"].is_string()) {
        fail(Errc::invalid_spec, "/metadata/description", "expected a string");
      }
      metadata = *it;
    }
    return ModelGraph(std::move(latents_), std::move(ordered_), std::move(terms_), std::move(metadata));
  }

 private:
  void parse_latents() {
    const json& arr = get_array(spec_, "latents", "", true);
    if (arr.empty()) fail(Errc::invalid_spec, "/latents", "at least one latent block is required");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "/latents/" + std::to_string(i);
      require_object(arr[i], where, {"name", "dim"});
      LatentBlock b{get_string(arr[i], "name", where), get_positive(require(arr[i], "dim", where), where + "/dim"), offset};
      claim_name(b.name, where);
      offset += b.dim;
      latents_.push_back(std::move(b));
    }
  }

  void parse_networks() {
    const json& arr = get_array(spec_, "networks", "", false);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "/networks/" + std::to_string(i);
      require_object(arr[i], where, {"name", "bundle"});
      const std::string name = get_string(arr[i], "name", where);
      const std::string bundle = get_string(arr[i], "bundle", where);
      if (networks_.count(name)) fail(Errc::invalid_spec, where + "/name", "duplicate network '" + name + "'");
      if (auto it = options_.networks.find(name); it != options_.networks.end()) {
        networks_[name] = it->second;
        continue;
      }
      const std::filesystem::path path = options_.base_dir / bundle;
      if (!std::filesystem::exists(path)) fail(Errc::unknown_bundle, where + "/bundle", "bundle file not found: " + path.string());
      try {
        networks_[name] = std::make_shared<const NetworkBundle>(load_bundle(path));
      } catch (const Error& e) {
        fail(e.code(), where + "/bundle", e.what());
      }
    }
  }

  std::shared_ptr<const NetworkBundle> network(const std::string& name, const std::string& where) {
    if (auto it = networks_.find(name); it != networks_.end()) return it->second;
    if (auto it = options_.networks.find(name); it != options_.networks.end()) return it->second;
    fail(Errc::unknown_bundle, where, "unknown network '" + name + "'");
  }

  void claim_name(const std::string& name, const std::string& where) {
    if (!names_.insert(name).second) fail(Errc::invalid_spec, where + "/name", "duplicate name '" + name + "'");
  }

  void parse_pipelines() {
    const json& arr = get_array(spec_, "pipelines", "", false);
    std::vector<PendingPipeline> pending;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "/pipelines/" + std::to_string(i);
      require_object(arr[i], where, {"name", "input", "stages"});
      PendingPipeline p;
      p.pipeline.name = get_string(arr[i], "name", where);
      p.pipeline.input = get_string(arr[i], "input", where);
      claim_name(p.pipeline.name, where);
      p.stages = get_array(arr[i], "stages", where, false);
      p.where = where;
      pending.push_back(std::move(p));
    }
    // Resolve in dependency order; anything left over is dangling or cyclic.
    std::vector<bool> done(pending.size(), false);
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (done[i]) continue;
        Pipeline& p = pending[i].pipeline;
        Shape shape;
        bool probs = false;
        if (auto l = latent_index(p.input)) {
          p.from_latent = true;
          p.source = *l;
          shape = Shape{latents_[*l].dim};
        } else if (auto q = ordered_index(p.input)) {
          p.from_latent = false;
          p.source = *q;
          shape = ordered_[*q].output_shape;
          probs = ordered_[*q].probabilities;
        } else {
          continue;
        }
        build_stages(p, pending[i].stages, pending[i].where, shape, probs);
        ordered_.push_back(p);
        done[i] = true;
        progress = true;
      }
    }
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (!done[i]) {
        fail(Errc::dangling_reference, pending[i].where + "/input",
             "input '" + pending[i].pipeline.input + "' is not a latent block or a resolvable pipeline");
      }
    }
  }

  void build_stages(Pipeline& p, const json& stages, const std::string& where, Shape shape, bool probs) {
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const std::string sw = where + "/stages/" + std::to_string(k);
      const json& sj = stages[k];
      if (!sj.is_object()) fail(Errc::invalid_spec, sw, "expected an object");
      const std::string op = get_string(sj, "op", sw);
      Stage st;
      try {
        if (op == "network") {
          require_object(sj, sw, {"op", "name"});
          st.kind = Stage::Kind::network;
          st.network = network(get_string(sj, "name", sw), sw + "/name");
          if (st.network->input_shape() != shape) {
            fail(Errc::shape_mismatch, sw, "network '" + st.network->name() + "' expects " +
                                               to_string(st.network->input_shape()) + ", pipeline provides " +
                                               to_string(shape));
          }
          shape = st.network->output_shape();
          probs = st.network->output_kind() == OutputKind::probabilities;
        } else if (op == "softmax") {
          require_object(sj, sw, {"op"});
          st.kind = Stage::Kind::softmax;
          if (shape.size() != 1) fail(Errc::shape_mismatch, sw, "softmax needs a rank-1 input, got " + to_string(shape));
          probs = true;
        } else if (op == "reshape") {
          require_object(sj, sw, {"op", "shape"});
          st.kind = Stage::Kind::reshape;
          st.shape = get_shape(require(sj, "shape", sw), sw + "/shape");
          if (element_count(st.shape) != element_count(shape)) {
            fail(Errc::shape_mismatch, sw, "cannot reshape " + to_string(shape) + " to " + to_string(st.shape));
          }
          shape = st.shape;
          probs = false;
        } else if (op == "expectation") {
          require_object(sj, sw, {"op", "values"});
          st.kind = Stage::Kind::expectation;
          if (!probs) fail(Errc::not_probabilities, sw, "expectation needs a probability vector input");
          auto values = get_numbers(require(sj, "values", sw), sw + "/values", options_.base_dir);
          if (Shape{values.size()} != shape) {
            fail(Errc::shape_mismatch, sw, "expectation has " + std::to_string(values.size()) +
                                               " class values for input " + to_string(shape));
          }
          const std::size_t n = values.size();
          st.weights = Tensor::matrix(1, n, std::move(values));
          shape = Shape{1};
          probs = false;
        } else if (op == "grayscale" || op == "coarsen" || op == "rescale_pool" || op == "mask") {
          st.kind = Stage::Kind::degrade;
          if (op == "grayscale") {
            require_object(sj, sw, {"op"});
            st.op = DegradationOp::grayscale_sum(shape);
          } else if (op == "coarsen") {
            require_object(sj, sw, {"op", "factor"});
            st.op = DegradationOp::coarsen(shape, get_positive(require(sj, "factor", sw), sw + "/factor"));
          } else if (op == "rescale_pool") {
            require_object(sj, sw, {"op", "factor"});
            st.op = DegradationOp::rescale_pool(shape, get_positive(require(sj, "factor", sw), sw + "/factor"));
          } else {
            require_object(sj, sw, {"op", "indices", "columns"});
            if (sj.contains("indices") == sj.contains("columns")) {
              fail(Errc::invalid_spec, sw, "mask needs exactly one of 'indices' or 'columns'");
            }
            if (sj.contains("indices")) {
              const json& idx = sj["indices"];
              if (!idx.is_array()) fail(Errc::invalid_spec, sw + "/indices", "expected an array");
              std::vector<std::size_t> masked;
              for (std::size_t i = 0; i < idx.size(); ++i) masked.push_back(get_index(idx[i], sw + "/indices/" + std::to_string(i)));
              st.op = DegradationOp::mask(shape, std::move(masked));
            } else {
              const json& cols = sj["columns"];
              if (!cols.is_array() || cols.size() != 2) fail(Errc::invalid_spec, sw + "/columns", "expected [begin, end)");
              st.op = DegradationOp::mask_columns(shape, get_index(cols[0], sw + "/columns/0"),
                                                  get_index(cols[1], sw + "/columns/1"));
            }
          }
          shape = st.op->output_shape();
          probs = false;
        } else {
          fail(Errc::invalid_spec, sw + "/op", "unknown stage op '" + op + "'");
        }
      } catch (const Error& e) {
        if (std::string_view(e.what()).starts_with(sw)) throw;
        fail(e.code(), sw, e.what());
      }
      p.stages.push_back(std::move(st));
    }
    p.output_shape = shape;
    p.probabilities = probs;
  }

  void parse_constraints() {
    const json& arr = get_array(spec_, "constraints", "", false);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "/constraints/" + std::to_string(i);
      const json& cj = arr[i];
      if (!cj.is_object()) fail(Errc::invalid_spec, where, "expected an object");
      const std::string type = get_string(cj, "type", where);
      LikelihoodTerm term;
      term.label = cj.contains("label") && cj["label"].is_string() ? cj["label"].get<std::string>()
                                                                  : type + "#" + std::to_string(i);
      if (cj.contains("label") && !cj["label"].is_string()) fail(Errc::invalid_spec, where + "/label", "expected a string");

      const json& inputs = get_array(cj, "inputs", where, true);
      if (inputs.empty()) fail(Errc::invalid_spec, where + "/inputs", "at least one input is required");
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::string iw = where + "/inputs/" + std::to_string(k);
        if (!inputs[k].is_string()) fail(Errc::invalid_spec, iw, "expected a pipeline name");
        auto idx = ordered_index(inputs[k].get<std::string>());
        if (!idx) fail(Errc::dangling_reference, iw, "unknown pipeline '" + inputs[k].get<std::string>() + "'");
        term.inputs.push_back(*idx);
      }

      if (type == "gaussian") {
        require_object(cj, where, {"type", "label", "inputs", "target", "noise_cov"});
        term.kind = TermKind::gaussian;
        if (term.inputs.size() != 1) fail(Errc::invalid_spec, where + "/inputs", "gaussian terms take one input");
        const std::size_t n = element_count(ordered_[term.inputs[0]].output_shape);
        auto target = get_numbers(require(cj, "target", where), where + "/target", options_.base_dir);
        if (target.size() != n) {
          fail(Errc::shape_mismatch, where + "/target", "data has " + std::to_string(target.size()) +
                                                            " values, pipeline output has " + std::to_string(n));
        }
        const json& nj = require(cj, "noise_cov", where);
        std::vector<double> noise;
        if (nj.is_number()) {
          noise.assign(n, get_positive_real(nj, where + "/noise_cov"));
        } else if (nj.is_array()) {
          if (nj.size() != n) fail(Errc::shape_mismatch, where + "/noise_cov", "expected " + std::to_string(n) + " variances");
          for (std::size_t k = 0; k < n; ++k) noise.push_back(get_positive_real(nj[k], where + "/noise_cov/" + std::to_string(k)));
        } else {
          fail(Errc::invalid_spec, where + "/noise_cov", "expected a positive number or array of variances");
        }
        std::vector<double> inverse(n);
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          inverse[k] = 1.0 / noise[k];
          norm -= 0.5 * std::log(2.0 * std::numbers::pi * noise[k]);
        }
        term.target = Tensor::vector(std::move(target));
        term.inverse_noise = Tensor::vector(std::move(inverse));
        term.log_normalizer = norm;
      } else if (type == "categorical") {
        require_object(cj, where, {"type", "label", "inputs", "target", "alpha"});
        term.kind = TermKind::categorical;
        if (term.inputs.size() != 1) fail(Errc::invalid_spec, where + "/inputs", "categorical terms take one input");
        const Pipeline& p = ordered_[term.inputs[0]];
        if (!p.probabilities) fail(Errc::not_probabilities, where + "/inputs/0", "pipeline '" + p.name + "' does not produce probabilities");
        term.target_class = get_index(require(cj, "target", where), where + "/target");
        if (term.target_class >= element_count(p.output_shape)) {
          fail(Errc::index_out_of_bounds, where + "/target", "class " + std::to_string(term.target_class) +
                                                                 " outside " + to_string(p.output_shape));
        }
        term.alpha = get_positive_real(require(cj, "alpha", where), where + "/alpha");
      } else if (type == "logic") {
        require_object(cj, where, {"type", "label", "inputs", "entries", "alpha"});
        term.kind = TermKind::logic;
        std::vector<std::size_t> counts;
        for (std::size_t k = 0; k < term.inputs.size(); ++k) {
          const Pipeline& p = ordered_[term.inputs[k]];
          if (!p.probabilities) {
            fail(Errc::not_probabilities, where + "/inputs/" + std::to_string(k),
                 "pipeline '" + p.name + "' does not produce probabilities");
          }
          counts.push_back(element_count(p.output_shape));
        }
        if (counts.size() > 3) fail(Errc::invalid_spec, where + "/inputs", "logic terms take 1 to 3 inputs");
        const json& ej = get_array(cj, "entries", where, true);
        std::vector<IndexTuple> entries;
        for (std::size_t k = 0; k < ej.size(); ++k) {
          const std::string ew = where + "/entries/" + std::to_string(k);
          if (!ej[k].is_array() || ej[k].size() != counts.size()) {
            fail(Errc::invalid_spec, ew, "expected a tuple of " + std::to_string(counts.size()) + " indices");
          }
          IndexTuple t;
          for (std::size_t a = 0; a < counts.size(); ++a) {
            t.push_back(get_index(ej[k][a], ew + "/" + std::to_string(a)));
            if (t.back() >= counts[a]) {
              fail(Errc::index_out_of_bounds, ew + "/" + std::to_string(a),
                   "index " + std::to_string(t.back()) + " exceeds class count " + std::to_string(counts[a]));
            }
          }
          entries.push_back(std::move(t));
        }
        term.logic.emplace(std::move(counts), std::move(entries));
        term.alpha = get_positive_real(require(cj, "alpha", where), where + "/alpha");
      } else {
        fail(Errc::invalid_spec, where + "/type", "unknown constraint type '" + type + "'");
      }
      terms_.push_back(std::move(term));
    }
  }

  std::optional<std::size_t> latent_index(const std::string& name) const {
    for (std::size_t i = 0; i < latents_.size(); ++i)
      if (latents_[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> ordered_index(const std::string& name) const {
    for (std::size_t i = 0; i < ordered_.size(); ++i)
      if (ordered_[i].name == name) return i;
    return std::nullopt;
  }

  const json& spec_;
  const CompileOptions& options_;
  std::vector<LatentBlock> latents_;
  std::map<std::string, std::shared_ptr<const NetworkBundle>> networks_;
  std::vector<Pipeline> ordered_;
  std::vector<LikelihoodTerm> terms_;
  std::set<std::string> names_;
};

}  // namespace

ModelGraph compile(const json& spec, const CompileOptions& options) {
  try {
    return Compiler(spec, options).run();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_spec, std::string("malformed spec: ") + e.what());
  }
}

ModelGraph compile_file(const std::filesystem::path& path,
                        std::map<std::string, std::shared_ptr<const NetworkBundle>> networks) {
  json spec;
  try {
    spec = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_spec, path.string() + ": " + e.what());
  }
  CompileOptions options;
  options.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  options.networks = std::move(networks);
  return compile(spec, options);
}

}  // namespace reasoner
