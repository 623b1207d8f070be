#include "hessavg/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hessavg/constants.hpp"
#include "hessavg/logistic.hpp"
#include "hessavg/quadratic.hpp"
#include "hessavg/synthetic.hpp"

namespace hessavg {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

double get_number(const Json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number()) fail(where, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

double require_number(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where, std::string("missing '") + key + "'");
  return get_number(obj, key, 0.0, where);
}

Index get_index(const Json& obj, const char* key, Index fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
  return v.get<Index>();
}

bool get_bool(const Json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) fail(where, std::string("'") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const Json& obj, const char* key, const std::string& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_string()) fail(where, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

// {"tag": {...}} with exactly one key.
std::pair<std::string, Json> single_tag(const Json& v, const std::string& where) {
  if (!v.is_object() || v.size() != 1) fail(where, "expected a number or an object with a single tag");
  return {v.begin().key(), v.begin().value()};
}

AlphaSchedule parse_alpha(const Json& v, const std::string& where) {
  if (v.is_number()) return alpha::Constant{v.get<double>()};
  auto [tag, body] = single_tag(v, where);
  const std::string w = where + "." + tag;
  if (tag == "constant") {
    if (body.is_number()) return alpha::Constant{body.get<double>()};
    check_keys(body, {"alpha"}, w);
    return alpha::Constant{require_number(body, "alpha", w)};
  }
  if (tag == "two_phase") {
    check_keys(body, {"global", "k_switch", "local"}, w);
    return alpha::TwoPhase{require_number(body, "global", w), get_index(body, "k_switch", 0, w),
                           get_number(body, "local", 1.0, w)};
  }
  if (tag == "step_decay") {
    check_keys(body, {"alpha0", "factor", "milestones"}, w);
    alpha::StepDecay s{require_number(body, "alpha0", w), get_number(body, "factor", 0.1, w), {}};
    if (body.contains("milestones")) s.milestones = body.at("milestones").get<std::vector<Index>>();
    return s;
  }
  fail(where, "unknown alpha schedule '" + tag + "'");
}

ThetaSchedule parse_theta(const Json& v, const std::string& where) {
  if (v.is_number()) return theta::Constant{v.get<double>()};
  auto [tag, body] = single_tag(v, where);
  const std::string w = where + "." + tag;
  if (tag == "constant") {
    if (body.is_number()) return theta::Constant{body.get<double>()};
    check_keys(body, {"theta"}, w);
    return theta::Constant{require_number(body, "theta", w)};
  }
  if (tag == "local_det" || tag == "local_stoch") {
    check_keys(body, {"global", "local", "k_switch"}, w);
    const double local = require_number(body, "local", w);
    const double global = get_number(body, "global", local, w);
    const Index ks = get_index(body, "k_switch", 0, w);
    if (tag == "local_det") return theta::LocalDet{global, local, ks};
    return theta::LocalStoch{global, local, ks};
  }
  fail(where, "unknown theta schedule '" + tag + "'");
}

IotaSchedule parse_iota(const Json& v, const std::string& where) {
  if (v.is_number()) return iota::Geometric{v.get<double>(), 1.0};
  auto [tag, body] = single_tag(v, where);
  const std::string w = where + "." + tag;
  if (tag == "geometric") {
    check_keys(body, {"iota0", "a"}, w);
    return iota::Geometric{require_number(body, "iota0", w), require_number(body, "a", w)};
  }
  if (tag == "super_det" || tag == "super_stoch") {
    check_keys(body, {"iota0", "a_local", "k_switch", "a_global"}, w);
    const double i0 = require_number(body, "iota0", w);
    const double al = require_number(body, "a_local", w);
    const Index ks = get_index(body, "k_switch", 0, w);
    const double ag = get_number(body, "a_global", 0.0, w);
    if (tag == "super_det") return iota::SuperDet{i0, al, ks, ag};
    return iota::SuperStoch{i0, al, ks, ag};
  }
  fail(where, "unknown iota schedule '" + tag + "'");
}

ProblemConstants parse_constants(const Json& v, const std::string& where) {
  check_keys(v, {"mu", "L", "M", "mu_tilde", "sigma1_g", "sigma2_g", "beta1_g", "beta2_g", "beta1_H", "beta2_H"},
             where);
  ProblemConstants c;
  if (v.contains("mu")) c.mu = require_number(v, "mu", where);
  if (v.contains("M")) c.M = require_number(v, "M", where);
  c.L = get_number(v, "L", 0.0, where);
  c.mu_tilde = get_number(v, "mu_tilde", c.mu_tilde, where);
  c.sigma1_g = get_number(v, "sigma1_g", 0.0, where);
  c.sigma2_g = get_number(v, "sigma2_g", 0.0, where);
  c.beta1_g = get_number(v, "beta1_g", 0.0, where);
  c.beta2_g = get_number(v, "beta2_g", 0.0, where);
  c.beta1_H = get_number(v, "beta1_H", 0.0, where);
  c.beta2_H = get_number(v, "beta2_H", 0.0, where);
  c.validate();
  return c;
}

OptimizerSpec parse_optimizer(const Json& v, const std::string& where) {
  check_keys(v, {"method", "variant", "mu_tilde", "weights", "rank", "floor", "beta1", "beta2", "eps"}, where);
  OptimizerSpec s;
  const std::string m = get_string(v, "method", "", where);
  const auto method = parse_method(m);
  if (!method) fail(where, "unknown method '" + m + "'");
  s.method = *method;
  const std::string variant = get_string(v, "variant", "plain", where);
  if (variant == "plain") {
    s.variant = AverageVariant::PlainAverage;
  } else if (variant == "abs") {
    s.variant = AverageVariant::AbsThenAverage;
  } else {
    fail(where, "variant must be 'plain' or 'abs'");
  }
  s.mu_tilde = get_number(v, "mu_tilde", s.mu_tilde, where);
  s.rank = get_index(v, "rank", s.rank, where);
  s.floor = get_number(v, "floor", s.floor, where);
  s.beta1 = get_number(v, "beta1", s.beta1, where);
  s.beta2 = get_number(v, "beta2", s.beta2, where);
  s.eps = get_number(v, "eps", s.eps, where);
  if (v.contains("weights")) {
    const Json& w = v.at("weights");
    if (w.is_string() && w.get<std::string>() == "uniform") {
      s.weights = WeightScheme::uniform();
    } else if (w.is_object() && w.size() == 1 && w.contains("decaying")) {
      s.weights = WeightScheme::decaying(require_number(w, "decaying", where + ".weights"));
    } else {
      fail(where, "weights must be \"uniform\" or {\"decaying\": beta2}");
    }
  }
  s.validate();
  return s;
}

void parse_grad_sampling(const Json& v, const std::string& where, RunConfig& run, bool& estimate) {
  check_keys(v, {"mode", "size", "sizes", "block_epochs", "initial", "cap", "weighting", "deterministic", "constants"},
             where);
  const std::string mode = get_string(v, "mode", "fixed", where);
  if (mode == "fixed") {
    run.grad_mode = grad_size::Fixed{get_index(v, "size", 1, where)};
  } else if (mode == "geometric_epochs") {
    if (!v.contains("sizes")) fail(where, "geometric_epochs needs 'sizes'");
    run.grad_mode = grad_size::GeometricEpochs{v.at("sizes").get<std::vector<Index>>(), get_index(v, "block_epochs", 1, where)};
  } else if (mode == "exact_norm_test") {
    run.grad_mode = grad_size::ExactNormTest{get_index(v, "initial", 1, where)};
  } else if (mode == "approx_norm_test") {
    run.grad_mode = grad_size::ApproxNormTest{get_index(v, "initial", 2, where)};
  } else if (mode == "theoretical_bound") {
    grad_size::TheoreticalBound tb;
    tb.deterministic = get_bool(v, "deterministic", false, where);
    if (!v.contains("constants") || (v.at("constants").is_string() && v.at("constants") == "estimate")) {
      estimate = true;
    } else {
      tb.constants = parse_constants(v.at("constants"), where + ".constants");
    }
    run.grad_mode = tb;
  } else {
    fail(where, "unknown mode '" + mode + "'");
  }
  run.grad_cap = get_index(v, "cap", run.grad_cap, where);
  const std::string weighting = get_string(v, "weighting", "identity", where);
  if (weighting == "identity") {
    run.weighting = NormWeighting::Identity;
  } else if (weighting == "inverse_hessian") {
    run.weighting = NormWeighting::InverseHessian;
  } else {
    fail(where, "weighting must be 'identity' or 'inverse_hessian'");
  }
}

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json num_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string ExperimentConfig::display_label() const {
  if (!label.empty()) return label;
  return std::string(method_name(run.optimizer.method));
}

ExperimentConfig parse_config(const Json& doc, const std::string& origin) {
  check_keys(doc, {"name", "label", "seed", "seeds", "epochs", "iterations_per_epoch", "trace", "problem", "init",
                   "optimizer", "schedules", "gradient_sampling", "hessian_sampling", "hessian_updates"},
             origin);
  ExperimentConfig c;
  c.canonical = doc.dump();
  c.name = get_string(doc, "name", c.name, origin);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) fail(origin, "'name' must be a plain file stem");
  c.label = get_string(doc, "label", "", origin);
  if (doc.contains("seeds")) {
    if (doc.contains("seed")) fail(origin, "give either 'seed' or 'seeds'");
    c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) fail(origin, "'seeds' must be nonempty");
  } else if (doc.contains("seed")) {
    c.seeds = {doc.at("seed").get<std::uint64_t>()};
  }
  if (!doc.contains("problem")) fail(origin, "missing 'problem'");
  c.problem = doc.at("problem");
  if (!c.problem.is_object() || !c.problem.contains("type")) fail(origin, "'problem' needs a 'type'");
  if (doc.contains("init")) c.init = doc.at("init");

  RunConfig& run = c.run;
  run.epochs = get_index(doc, "epochs", 1, origin);
  run.iterations_per_epoch = get_index(doc, "iterations_per_epoch", 100, origin);
  if (doc.contains("trace")) {
    const Json& t = doc.at("trace");
    const std::string w = origin + ".trace";
    check_keys(t, {"interval", "rolling_window", "wall_clock", "divergence_factor"}, w);
    run.trace.interval = get_index(t, "interval", run.trace.interval, w);
    run.trace.rolling_window = get_index(t, "rolling_window", run.trace.rolling_window, w);
    run.trace.wall_clock = get_bool(t, "wall_clock", false, w);
    run.trace.divergence_factor = get_number(t, "divergence_factor", run.trace.divergence_factor, w);
  }
  if (!doc.contains("optimizer")) fail(origin, "missing 'optimizer'");
  run.optimizer = parse_optimizer(doc.at("optimizer"), origin + ".optimizer");
  if (doc.contains("schedules")) {
    const Json& s = doc.at("schedules");
    const std::string w = origin + ".schedules";
    check_keys(s, {"alpha", "theta", "iota"}, w);
    if (s.contains("alpha")) run.schedules.alpha = parse_alpha(s.at("alpha"), w + ".alpha");
    if (s.contains("theta")) run.schedules.theta = parse_theta(s.at("theta"), w + ".theta");
    if (s.contains("iota")) run.schedules.iota = parse_iota(s.at("iota"), w + ".iota");
  }
  run.schedules.validate();
  bool estimate = false;
  if (doc.contains("gradient_sampling")) {
    parse_grad_sampling(doc.at("gradient_sampling"), origin + ".gradient_sampling", run, estimate);
  }
  c.estimate_constants = estimate;
  if (doc.contains("hessian_sampling")) {
    const Json& h = doc.at("hessian_sampling");
    const std::string w = origin + ".hessian_sampling";
    check_keys(h, {"kind", "size"}, w);
    const std::string kind = get_string(h, "kind", "iid", w);
    if (kind == "iid") {
      run.hessian_kind = HessianSamplerKind::Iid;
    } else if (kind == "cyclic") {
      run.hessian_kind = HessianSamplerKind::Cyclic;
    } else {
      fail(w, "kind must be 'iid' or 'cyclic'");
    }
    run.hessian_size = get_index(h, "size", 1, w);
  }
  if (doc.contains("hessian_updates")) {
    const Json& h = doc.at("hessian_updates");
    const std::string w = origin + ".hessian_updates";
    check_keys(h, {"warmup", "frequency"}, w);
    run.policy.warmup = get_index(h, "warmup", 0, w);
    run.policy.hf = get_index(h, "frequency", 1, w);
  }
  run.policy.validate();
  if (run.epochs < 0) fail(origin, "'epochs' must be nonnegative");
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config " + file.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  try {
    return parse_config(doc, file.filename().string());
  } catch (const Json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(config.canonical); }

std::unique_ptr<FiniteSumOracle> build_problem(const Json& problem, const DataOptions& data) {
  const std::string where = "problem";
  const std::string type = get_string(problem, "type", "", where);
  if (type == "quadratic") {
    check_keys(problem, {"type", "dim", "keep_prob", "seed", "spectrum"}, where);
    const Index d = get_index(problem, "dim", 100, where);
    const double p = get_number(problem, "keep_prob", 0.5, where);
    const auto seed = static_cast<std::uint64_t>(get_index(problem, "seed", 0, where));
    std::function<double(Index)> spectrum = default_quadratic_spectrum;
    if (problem.contains("spectrum")) {
      const Json& s = problem.at("spectrum");
      if (s.is_string() && s == "default") {
      } else if (s.is_object() && s.contains("constant")) {
        const double c = require_number(s, "constant", where + ".spectrum");
        spectrum = [c](Index) { return c; };
      } else if (s.is_array()) {
        const auto vals = s.get<std::vector<double>>();
        if (static_cast<Index>(vals.size()) != d) fail(where, "spectrum list must have 'dim' entries");
        spectrum = [vals](Index i) { return vals[static_cast<std::size_t>(i - 1)]; };
      } else {
        fail(where, "spectrum must be \"default\", {\"constant\": c} or a list");
      }
    }
    return std::make_unique<QuadraticProblem>(quadratic_generate(d, spectrum, p, seed));
  }
  if (type == "logistic") {
    check_keys(problem, {"type", "dataset", "file", "dim", "label_map", "train_size", "split_seed"}, where);
    const auto split_seed = static_cast<std::uint64_t>(get_index(problem, "split_seed", 0, where));
    if (problem.contains("dataset")) {
      const auto manifests = load_manifests(data.manifest);
      const DatasetManifest& m = find_manifest(manifests, get_string(problem, "dataset", "", where));
      const HttpFetcher fetcher = data.fetcher ? data.fetcher : curl_fetcher();
      return std::make_unique<LogisticProblem>(load_dataset(m, data.data_dir, split_seed, fetcher), m.name);
    }
    if (!problem.contains("file")) fail(where, "logistic problem needs 'dataset' or 'file'");
    const fs::path file = get_string(problem, "file", "", where);
    LibsvmOptions opts;
    opts.dim = get_index(problem, "dim", 0, where);
    if (problem.contains("label_map")) {
      for (const auto& [k, v] : problem.at("label_map").items()) opts.label_map[std::stod(k)] = v.get<int>();
    }
    SparseDataset ds = parse_libsvm(read_dataset_text(file, file.extension() == ".bz2" ? "bz2" : "none"), opts);
    const Index train = get_index(problem, "train_size", 0, where);
    if (train > 0) ds = train_split(ds, train, split_seed).first;
    return std::make_unique<LogisticProblem>(ds, file.stem().string());
  }
  if (type == "synthetic_sum") {
    check_keys(problem, {"type", "components", "dim", "curvature", "eig_min", "eig_max", "center_scale", "seed"}, where);
    SyntheticSumOptions o;
    o.components = get_index(problem, "components", o.components, where);
    o.dim = get_index(problem, "dim", o.dim, where);
    o.curvature = get_number(problem, "curvature", o.curvature, where);
    o.eig_min = get_number(problem, "eig_min", o.eig_min, where);
    o.eig_max = get_number(problem, "eig_max", o.eig_max, where);
    o.center_scale = get_number(problem, "center_scale", o.center_scale, where);
    o.seed = static_cast<std::uint64_t>(get_index(problem, "seed", 0, where));
    return std::make_unique<SyntheticFiniteSum>(o);
  }
  fail(where, "unknown problem type '" + type + "'");
}

Vec build_initial_point(const Json& init, Index dim, std::uint64_t seed) {
  if (init.is_string()) {
    if (init == "zeros") return Vec::Zero(dim);
    fail("init", "unknown initializer '" + init.get<std::string>() + "'");
  }
  check_keys(init, {"normal", "value"}, "init");
  if (init.contains("normal")) {
    const double scale = require_number(init, "normal", "init");
    RandomStream rng(seed, "init");
    return scale * rng.normal_vector(dim);
  }
  if (init.contains("value")) {
    const auto v = init.at("value").get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != dim) fail("init", "value has the wrong dimension");
    return Eigen::Map<const Vec>(v.data(), dim);
  }
  fail("init", "expected \"zeros\", {\"normal\": scale} or {\"value\": [...]}");
}

void write_trace_csv(std::ostream& os, const RunTrace& trace, const std::string& hash, std::uint64_t seed) {
  os << "# hessavg-trace v1 config_hash=" << hash << " seed=" << seed << "\n";
  os << "k,epoch,f,f_batch,f_rolling,grad_norm,x_size,s_size,hessian_probes,eec,wall_ms,dist_to_opt\n";
  for (const auto& r : trace.records) {
    os << r.k << ',' << fmt_double(r.epoch) << ',' << fmt_double(r.f) << ',' << fmt_double(r.f_batch) << ','
       << fmt_double(r.f_rolling) << ',' << fmt_double(r.grad_norm) << ',' << r.x_size << ',' << r.s_size << ','
       << r.hessian_probes << ',' << fmt_double(r.eec) << ',' << fmt_double(r.wall_ms) << ','
       << (r.dist_to_opt ? fmt_double(*r.dist_to_opt) : std::string()) << '\n';
  }
}

Json summary_json(const ExperimentResult& result, const ExperimentConfig& config) {
  const RunSummary& s = result.trace.summary;
  Json j;
  j["name"] = result.name;
  j["label"] = config.display_label();
  j["method"] = std::string(method_name(config.run.optimizer.method));
  j["seed"] = result.seed;
  j["config_hash"] = result.config_hash;
  j["final_f"] = num_or_null(s.final_f);
  j["best_f"] = num_or_null(s.best_f);
  j["final_grad_norm"] = num_or_null(s.final_grad_norm);
  j["diverged"] = s.diverged;
  j["diverged_at"] = s.diverged_at;
  j["failure"] = s.failure;
  j["iterations"] = s.iterations;
  j["epochs"] = s.epochs;
  j["eec"] = s.eec;
  j["hessian_probes"] = s.hessian_probes;
  j["final_dist_to_opt"] = s.final_dist_to_opt ? num_or_null(*s.final_dist_to_opt) : Json(nullptr);
  j["config"] = Json::parse(config.canonical);
  return j;
}

void write_file_atomic(const fs::path& file, const std::string& contents) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, file, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const DataOptions& data,
                                const fs::path& out) {
  auto oracle = build_problem(config.problem, data);
  RunConfig run = config.run;
  run.seed = seed;
  run.w0 = build_initial_point(config.init, oracle->dim(), seed);
  if (config.estimate_constants) {
    // Empirical constants from the initial point and a few random probes.
    RandomStream rng(seed, "constants-probes");
    std::vector<Vec> probes{*run.w0, *run.w0 + rng.normal_vector(oracle->dim())};
    std::vector<Sample> samples;
    for (int i = 0; i < 4; ++i) samples.push_back(oracle->draw(16, rng, true));
    auto& tb = std::get<grad_size::TheoreticalBound>(run.grad_mode);
    tb.constants = estimate_constants(*oracle, probes, samples, seed);
  }

  ExperimentResult res;
  res.name = config.name;
  res.label = config.display_label();
  res.seed = seed;
  res.config_hash = config_hash(config);
  res.trace = run_epochs(*oracle, run);
  if (!out.empty()) {
    const std::string stem = config.name + "_seed" + std::to_string(seed);
    res.csv_path = out / (stem + ".csv");
    res.summary_path = out / (stem + ".json");
    std::ostringstream csv;
    write_trace_csv(csv, res.trace, res.config_hash, seed);
    write_file_atomic(res.csv_path, csv.str());
    write_file_atomic(res.summary_path, summary_json(res, config).dump(2) + "\n");
  }
  return res;
}

std::vector<double> TraceTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("trace has no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

TraceTable read_trace_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open trace " + file.string());
  TraceTable t;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.meta = line;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": wrong number of cells");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c.empty()) {
        row.push_back(kNaN);
        continue;
      }
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(c, &pos));
        if (pos != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw ValidationError(file.string() + ": no header row");
  return t;
}

Json RateReport::to_json() const {
  Json j;
  j["k_start"] = k_start;
  j["k_end"] = k_end;
  j["points"] = points;
  j["slope"] = slope;
  j["intercept"] = intercept;
  j["mean_ratio"] = mean_ratio;
  j["ks"] = ks;
  Json r = Json::array();
  for (double v : ratios) r.push_back(num_or_null(v));
  j["ratios"] = r;
  return j;
}

RateReport estimate_rates(const std::vector<double>& errors, Index k_start, Index k_end, double floor,
                          Index min_points) {
  const auto n = static_cast<Index>(errors.size());
  if (k_start < 0) throw ValidationError("estimate_rates: k_start must be nonnegative");
  const Index last = k_end < 0 ? n - 1 : std::min(k_end, n - 1);
  RateReport rep;
  rep.k_start = k_start;
  rep.k_end = last;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, slog = 0;
  for (Index k = k_start; k + 1 <= last; ++k) {
    const double a = errors[static_cast<std::size_t>(k)];
    const double b = errors[static_cast<std::size_t>(k + 1)];
    if (!(a > floor) || !(b > floor) || !std::isfinite(a) || !std::isfinite(b)) continue;
    const double rho = b / a;
    const double x = std::log(static_cast<double>(k + 1));
    const double y = std::log(rho);
    rep.ks.push_back(k);
    rep.ratios.push_back(rho);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    slog += y;
  }
  rep.points = static_cast<Index>(rep.ratios.size());
  if (rep.points < min_points) {
    throw ValidationError("estimate_rates: only " + std::to_string(rep.points) + " usable points above the floor (need " +
                          std::to_string(min_points) + ")");
  }
  const double m = static_cast<double>(rep.points);
  const double den = m * sxx - sx * sx;
  rep.slope = den > 0 ? (m * sxy - sx * sy) / den : 0.0;
  rep.intercept = (sy - rep.slope * sx) / m;
  rep.mean_ratio = std::exp(slog / m);
  return rep;
}

std::string alpha_label(const AlphaSchedule& s) {
  if (const auto* c = std::get_if<alpha::Constant>(&s)) return short_double(c->alpha);
  if (const auto* t = std::get_if<alpha::TwoPhase>(&s)) {
    return short_double(t->global) + "->" + short_double(t->local) + "@" + std::to_string(t->k_switch);
  }
  const auto& d = std::get<alpha::StepDecay>(s);
  return short_double(d.alpha0) + "*" + short_double(d.factor) + "^m";
}

std::string SweepResult::rows_csv() const {
  std::ostringstream os;
  os << "label,method,alpha,rank,seed,final_f,eec,diverged,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << r.label << ',' << r.method << ',' << r.alpha << ',' << r.rank << ',' << r.seed << ','
       << fmt_double(r.final_f) << ',' << fmt_double(r.eec) << ',' << (r.diverged ? 1 : 0) << ',' << err << '\n';
  }
  return os.str();
}

std::string SweepResult::table_text() const {
  std::vector<std::array<std::string, 7>> cells;
  cells.push_back({"label", "method", "alpha", "rank", "runs", "mean f", "mean eec"});
  for (const auto& g : groups) {
    std::string f;
    if (g.diverged == g.runs) {
      f = "✗";
    } else {
      f = short_double(g.mean_final_f);
      if (g.diverged > 0) f += " (" + std::to_string(g.diverged) + "✗)";
    }
    // rank only means something for the Hutchinson-based methods
    const auto m = parse_method(g.method);
    const std::string rank = m && uses_diagonal(*m) ? std::to_string(g.rank) : "-";
    cells.push_back({g.label, g.method, g.alpha, rank, std::to_string(g.runs), f,
                     g.diverged == g.runs ? "-" : short_double(g.mean_eec)});
  }
  // Width in code points so the ✗ marker does not throw columns off.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::array<std::size_t, 7> wid{};
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) wid[i] = std::max(wid[i], width(row[i]));
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << row[i] << std::string(wid[i] - width(row[i]) + (i + 1 < row.size() ? 2 : 0), ' ');
    }
    os << '\n';
  }
  return os.str();
}

SweepResult sweep(const std::vector<ExperimentConfig>& configs, const DataOptions& data, const fs::path& out,
                  unsigned parallelism) {
  if (configs.empty()) throw ValidationError("sweep: no configs");
  struct Job {
    std::size_t config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i)
    for (auto s : configs[i].seeds) jobs.push_back({i, s});

  SweepResult res;
  res.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const ExperimentConfig& c = configs[jobs[j].config];
      SweepRow& row = res.rows[j];
      row.label = c.display_label();
      row.method = std::string(method_name(c.run.optimizer.method));
      row.alpha = alpha_label(c.run.schedules.alpha);
      row.rank = uses_diagonal(c.run.optimizer.method) ? c.run.optimizer.rank : 0;
      row.seed = jobs[j].seed;
      try {
        const auto r = run_experiment(c, jobs[j].seed, data, out);
        row.final_f = r.trace.summary.final_f;
        row.eec = r.trace.summary.eec;
        row.diverged = r.trace.summary.diverged;
        row.error = r.trace.summary.failure;
      } catch (const std::exception& e) {
        row.final_f = kNaN;
        row.diverged = true;
        row.error = e.what();
      }
    }
  };
  unsigned threads = parallelism ? parallelism : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& r : res.rows) {
    auto it = std::find_if(res.groups.begin(), res.groups.end(), [&](const SweepGroup& g) {
      return g.label == r.label && g.method == r.method && g.alpha == r.alpha && g.rank == r.rank;
    });
    if (it == res.groups.end()) {
      res.groups.push_back({r.label, r.method, r.alpha, r.rank, 0, 0, 0.0, 0.0});
      it = std::prev(res.groups.end());
    }
    ++it->runs;
    if (r.diverged || !std::isfinite(r.final_f)) {
      ++it->diverged;
    } else {
      it->mean_final_f += r.final_f;
      it->mean_eec += r.eec;
    }
  }
  for (auto& g : res.groups) {
    const Index ok = g.runs - g.diverged;
    if (ok > 0) {
      g.mean_final_f /= static_cast<double>(ok);
      g.mean_eec /= static_cast<double>(ok);
    } else {
      g.mean_final_f = kNaN;
      g.mean_eec = kNaN;
    }
  }
  if (!out.empty()) {
    write_file_atomic(out / "sweep_runs.csv", res.rows_csv());
    write_file_atomic(out / "sweep_table.txt", res.table_text());
  }
  return res;
}

std::vector<ExperimentConfig> load_config_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("not a config directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no .json configs in " + dir.string());
  std::vector<ExperimentConfig> out;
  std::set<std::string> names;
  for (const auto& f : files) {
    out.push_back(load_config(f));
    if (!names.insert(out.back().name).second) {
      throw ValidationError("duplicate config name '" + out.back().name + "' in " + dir.string());
    }
  }
  return out;
}

}  // namespace hessavg
