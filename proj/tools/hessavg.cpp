// Command-line front end: data fetching, problem generation, runs, sweeps and
// post-processing of traces.

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "CLI11.hpp"

#include "hessavg/harness.hpp"
#include "hessavg/quadratic.hpp"

namespace fs = std::filesystem;
using namespace hessavg;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data_dir;
  std::string manifest;
};

DataOptions data_options(const Common& c) {
  DataOptions d;
  if (!c.data_dir.empty()) d.data_dir = c.data_dir;
  if (!c.manifest.empty()) d.manifest = c.manifest;
  return d;
}

void add_common(CLI::App* app, Common& c, bool with_seed = true) {
  if (with_seed) app->add_option("--seed", c.seed, "Override the config seed(s)");
  app->add_option("--out", c.out, "Output directory (or file for gen-quadratic)");
  app->add_option("--data-dir", c.data_dir, "Dataset cache directory (default $HESSAVG_DATA_DIR or data/cache)");
  app->add_option("--manifest", c.manifest, "Dataset manifest (default $HESSAVG_MANIFEST or data/datasets.json)");
}

Json matrix_json(const Mat& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Json vector_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hessian-averaged subsampled Newton toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* fetch = app.add_subcommand("fetch-data", "Download and verify a dataset from the manifest");
  std::string dataset;
  fetch->add_option("name", dataset, "Dataset name")->required();
  add_common(fetch, common, false);

  auto* gen = app.add_subcommand("gen-quadratic", "Write a random subsampled quadratic (A, b) as JSON");
  Index gen_dim = 100;
  double keep_prob = 0.5;
  gen->add_option("--dim", gen_dim, "Dimension")->check(CLI::PositiveNumber);
  gen->add_option("--keep-prob", keep_prob, "Mask keep probability");
  add_common(gen, common);

  auto* run = app.add_subcommand("run", "Run one experiment config");
  std::string config_path;
  run->add_option("config", config_path, "Config file")->required();
  add_common(run, common);

  auto* sw = app.add_subcommand("sweep", "Run every config in a directory and tabulate");
  std::string config_dir;
  unsigned jobs = 0;
  sw->add_option("config-dir", config_dir, "Directory of .json configs")->required();
  sw->add_option("--jobs", jobs, "Concurrent runs (default: hardware threads)");
  add_common(sw, common);

  auto* rates = app.add_subcommand("rates", "Fit error-ratio decay on a trace column");
  std::string trace_path;
  std::string column = "dist_to_opt";
  Index k_start = 0;
  Index k_end = -1;
  double floor = 1e-13;
  rates->add_option("trace", trace_path, "Trace CSV")->required();
  rates->add_option("--col", column, "Error column");
  rates->add_option("--k-start", k_start, "First k of the fit");
  rates->add_option("--k-end", k_end, "Last k of the fit (default: end)");
  rates->add_option("--floor", floor, "Ignore errors at or below this value");

  auto* eec_cmd = app.add_subcommand("eec", "Epoch-equivalent compute calculator");
  double epochs = 0;
  Index rank = 0;
  Index hf = 1;
  eec_cmd->add_option("--epochs", epochs, "Epochs")->required();
  eec_cmd->add_option("--rank", rank, "Hessian probes per update (0 for first-order)");
  eec_cmd->add_option("--hf", hf, "Hessian update frequency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (!e.get_exit_code()) return 0;
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*fetch) {
      const auto d = data_options(common);
      const auto manifests = load_manifests(d.manifest);
      const fs::path dir = common.out.empty() ? d.data_dir : fs::path(common.out);
      std::cout << fetch_dataset(find_manifest(manifests, dataset), dir).string() << "\n";
    } else if (*gen) {
      const auto problem = quadratic_generate(gen_dim, default_quadratic_spectrum, keep_prob, common.seed.value_or(0));
      Json j;
      j["dim"] = gen_dim;
      j["keep_prob"] = keep_prob;
      j["seed"] = common.seed.value_or(0);
      j["A"] = matrix_json(problem.a());
      j["b"] = vector_json(problem.b());
      j["w_star"] = vector_json(problem.optimum()->w);
      j["f_star"] = problem.optimum()->f;
      const std::string text = j.dump() + "\n";
      if (common.out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(common.out, text);
      }
    } else if (*run) {
      ExperimentConfig cfg = load_config(config_path);
      if (common.seed) cfg.seeds = {*common.seed};
      const fs::path out = common.out.empty() ? fs::path("runs") : fs::path(common.out);
      for (auto seed : cfg.seeds) {
        const auto res = run_experiment(cfg, seed, data_options(common), out);
        std::cout << summary_json(res, cfg).dump() << "\n";
      }
    } else if (*sw) {
      auto configs = load_config_dir(config_dir);
      if (common.seed)
        for (auto& c : configs) c.seeds = {*common.seed};
      const fs::path out = common.out.empty() ? fs::path("runs") : fs::path(common.out);
      const auto res = sweep(configs, data_options(common), out, jobs);
      std::cout << res.table_text();
    } else if (*rates) {
      const auto table = read_trace_csv(trace_path);
      const auto ks = table.column("k");
      const auto vals = table.column(column);
      std::vector<double> series;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        const auto k = static_cast<std::size_t>(ks[i]);
        if (series.size() <= k) series.resize(k + 1, std::numeric_limits<double>::quiet_NaN());
        series[k] = vals[i];
      }
      std::cout << estimate_rates(series, k_start, k_end, floor).to_json().dump() << "\n";
    } else if (*eec_cmd) {
      std::cout << eec(epochs, rank, hf) << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
