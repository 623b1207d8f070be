#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "hessavg/harness.hpp"

using namespace hessavg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hessavg-harness-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json small_config() {
  return Json::parse(R"({
    "name": "tiny",
    "seeds": [1, 2],
    "epochs": 3,
    "problem": {"type": "synthetic_sum", "components": 12, "dim": 4, "curvature": 1.0, "seed": 3},
    "init": {"normal": 1.0},
    "optimizer": {"method": "fan", "weights": {"decaying": 0.9}, "mu_tilde": 1e-3},
    "schedules": {"alpha": 0.5, "theta": 0.5, "iota": {"geometric": {"iota0": 1e-3, "a": 0.9}}},
    "gradient_sampling": {"mode": "approx_norm_test", "initial": 2},
    "hessian_sampling": {"kind": "cyclic", "size": 3},
    "trace": {"interval": 2}
  })");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HESSAVG_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(small_config());
  CHECK(c.name == "tiny");
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.run.epochs == 3);
  CHECK(c.run.optimizer.method == Method::FAN);
  CHECK(c.run.optimizer.weights.kind == WeightScheme::Kind::Decaying);
  CHECK(c.run.hessian_kind == HessianSamplerKind::Cyclic);
  CHECK(c.run.hessian_size == 3);
  CHECK(std::holds_alternative<grad_size::ApproxNormTest>(c.run.grad_mode));
  CHECK(eval_alpha(c.run.schedules.alpha, 5) == 0.5);
  CHECK(eval_iota(c.run.schedules.iota, 1) == doctest::Approx(9e-4));
  CHECK(c.display_label() == "fan");

  auto bad = small_config();
  bad["optimizer"]["momentum"] = 0.9;
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = small_config();
  bad["optimizer"]["method"] = "lbfgs";
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = small_config();
  bad.erase("problem");
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = small_config();
  bad["schedules"]["alpha"] = Json::parse(R"({"cosine": {}})");
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = small_config();
  bad["seed"] = 3;
  CHECK_THROWS_AS(parse_config(bad), ValidationError);

  auto tb = small_config();
  tb["gradient_sampling"] = Json::parse(R"({"mode": "theoretical_bound", "constants": "estimate"})");
  CHECK(parse_config(tb).estimate_constants);
  tb["gradient_sampling"] = Json::parse(R"({"mode": "theoretical_bound", "constants": {"sigma2_g": 2.0}})");
  const auto parsed = parse_config(tb);
  CHECK_FALSE(parsed.estimate_constants);
  CHECK(std::get<grad_size::TheoreticalBound>(parsed.run.grad_mode).constants.sigma2_g == 2.0);
}

TEST_CASE("config hash tracks content") {
  auto a = parse_config(small_config());
  auto j = small_config();
  j["epochs"] = 4;
  auto b = parse_config(j);
  CHECK(config_hash(a) == config_hash(parse_config(small_config())));
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 64);
}

TEST_CASE("initial points") {
  CHECK(build_initial_point("zeros", 3, 0) == Vec::Zero(3));
  const Vec a = build_initial_point(Json::parse(R"({"normal": 2.0})"), 5, 7);
  const Vec b = build_initial_point(Json::parse(R"({"normal": 2.0})"), 5, 7);
  const Vec c = build_initial_point(Json::parse(R"({"normal": 2.0})"), 5, 8);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(build_initial_point(Json::parse(R"({"value": [1, 2]})"), 2, 0) == Vec((Vec(2) << 1, 2).finished()));
  CHECK_THROWS_AS(build_initial_point(Json::parse(R"({"value": [1]})"), 2, 0), ValidationError);
  CHECK_THROWS_AS(build_initial_point("ones", 2, 0), ValidationError);
}

TEST_CASE("problem construction") {
  DataOptions data;
  auto q = build_problem(Json::parse(R"({"type": "quadratic", "dim": 7, "spectrum": {"constant": 2}})"), data);
  CHECK(q->dim() == 7);
  CHECK_FALSE(q->num_components());
  auto s = build_problem(Json::parse(R"({"type": "synthetic_sum", "components": 5, "dim": 3})"), data);
  CHECK(s->num_components() == 5);
  CHECK_THROWS_AS(build_problem(Json::parse(R"({"type": "mnist"})"), data), ValidationError);
  CHECK_THROWS_AS(build_problem(Json::parse(R"({"type": "quadratic", "rank": 3})"), data), ValidationError);

  const fs::path dir = scratch_dir("libsvm");
  std::ofstream(dir / "toy.svm") << "1 1:0.5 3:1\n2 2:1\n1 1:-1\n";
  Json lj = {{"type", "logistic"}, {"file", (dir / "toy.svm").string()}, {"dim", 4}, {"label_map", {{"1", 1}, {"2", -1}}}};
  auto l = build_problem(lj, data);
  CHECK(l->dim() == 4);
  CHECK(l->num_components() == 3);
  fs::remove_all(dir);
}

TEST_CASE("runs are deterministic and persisted") {
  const fs::path dir = scratch_dir("det");
  const auto c = parse_config(small_config());
  DataOptions data;
  const auto r1 = run_experiment(c, 1, data, dir / "a");
  const auto r2 = run_experiment(c, 1, data, dir / "b");
  const std::string csv1 = slurp(r1.csv_path);
  CHECK(csv1 == slurp(r2.csv_path));
  CHECK(csv1.rfind("# hessavg-trace v1 config_hash=" + config_hash(c) + " seed=1\n", 0) == 0);
  const auto r3 = run_experiment(c, 2, data, dir / "a");
  CHECK(slurp(r3.csv_path) != csv1);

  const Json summary = Json::parse(slurp(r1.summary_path));
  CHECK(summary["seed"] == 1);
  CHECK(summary["config_hash"] == config_hash(c));
  CHECK(summary["config"]["name"] == "tiny");
  CHECK(summary.contains("final_f"));
  CHECK(summary.contains("best_f"));
  CHECK(summary.contains("eec"));
  CHECK(summary["diverged"] == false);

  const auto table = read_trace_csv(r1.csv_path);
  const auto k = table.column("k");
  const auto f = table.column("f");
  const auto dist = table.column("dist_to_opt");
  CHECK(k.size() == r1.trace.records.size());
  CHECK(k.front() == 0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    CHECK(std::isnan(f[i]) == std::isnan(dist[i]));
    if (!std::isnan(f[i])) CHECK(f[i] == r1.trace.records[i].f);
  }
  CHECK_THROWS_AS(table.column("nope"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("zero epochs leaves only the initial record") {
  auto j = small_config();
  j["epochs"] = 0;
  const auto r = run_experiment(parse_config(j), 1, {}, {});
  REQUIRE(r.trace.records.size() == 1);
  CHECK(r.trace.records[0].k == 0);
  CHECK(r.trace.w_final == build_initial_point(j["init"], 4, 1));
}

TEST_CASE("dist_to_opt only for problems with a known optimum") {
  Json j = small_config();
  j["problem"] = Json::parse(R"({"type": "quadratic", "dim": 5})");
  j["optimizer"] = Json::parse(R"({"method": "sgd"})");
  j["schedules"]["alpha"] = 1e-3;
  j["gradient_sampling"] = Json::parse(R"({"mode": "fixed", "size": 4})");
  j.erase("hessian_sampling");
  j["iterations_per_epoch"] = 10;
  const auto r = run_experiment(parse_config(j), 1, {}, {});
  CHECK(r.trace.records[0].dist_to_opt.has_value());

  SparseDataset d;
  d.dim = 2;
  d.rows = {{{1, 1.0}}, {{2, 1.0}}};
  d.labels = {1, -1};
  const fs::path dir = scratch_dir("noopt");
  std::ofstream(dir / "d.svm") << serialize_libsvm(d);
  j["problem"] = {{"type", "logistic"}, {"file", (dir / "d.svm").string()}};
  j["gradient_sampling"] = Json::parse(R"({"mode": "fixed", "size": 1})");
  const auto l = run_experiment(parse_config(j), 1, {}, {});
  for (const auto& rec : l.trace.records) CHECK_FALSE(rec.dist_to_opt.has_value());
  fs::remove_all(dir);
}

TEST_CASE("rate estimation") {
  std::vector<double> geo, fact;
  double f = 1.0;
  for (int k = 0; k < 40; ++k) {
    geo.push_back(std::pow(0.9, k));
    fact.push_back(f);
    f /= (k + 1);
  }
  const auto g = estimate_rates(geo, 0);
  CHECK(std::abs(g.slope) < 1e-6);
  CHECK(g.mean_ratio == doctest::Approx(0.9).epsilon(1e-6));
  const auto r = estimate_rates(fact, 0);
  CHECK(r.slope == doctest::Approx(-1.0).epsilon(0.02));
  for (std::size_t i = 0; i < r.ks.size(); ++i) CHECK(r.ratios[i] == doctest::Approx(1.0 / (r.ks[i] + 1)));
  for (std::size_t i = 0; i + 1 < r.ks.size(); ++i) CHECK(fact[r.ks[i] + 1] > 1e-13);
  CHECK_THROWS_AS(estimate_rates(std::vector<double>(5, 1.0), 0), ValidationError);
  std::vector<double> tiny(30, 1e-14);
  CHECK_THROWS_AS(estimate_rates(tiny, 0), ValidationError);
  const auto part = estimate_rates(geo, 10, 30);
  CHECK(part.points == 20);
  CHECK(part.ks.front() == 10);
}

TEST_CASE("sweep rows and means") {
  const fs::path dir = scratch_dir("sweep");
  auto one = small_config();
  one["seeds"] = {5};
  auto s1 = sweep({parse_config(one)}, {}, dir, 1);
  CHECK(s1.rows.size() == 1);
  CHECK(s1.groups.size() == 1);

  auto two = small_config();
  auto res = sweep({parse_config(two)}, {}, dir, 2);
  REQUIRE(res.rows.size() == 2);
  REQUIRE(res.groups.size() == 1);
  CHECK(res.groups[0].mean_final_f == doctest::Approx((res.rows[0].final_f + res.rows[1].final_f) / 2));
  CHECK(res.rows[0].seed == 1);
  CHECK(res.rows[1].seed == 2);
  CHECK(fs::exists(dir / "sweep_runs.csv"));
  CHECK(fs::exists(dir / "sweep_table.txt"));

  auto boom = small_config();
  boom["name"] = "boom";
  boom["optimizer"] = Json::parse(R"({"method": "sgd"})");
  boom["schedules"]["alpha"] = 100.0;
  boom["gradient_sampling"] = Json::parse(R"({"mode": "fixed", "size": 12})");
  boom["epochs"] = 50;
  auto mixed = sweep({parse_config(two), parse_config(boom)}, {}, dir, 3);
  REQUIRE(mixed.groups.size() == 2);
  CHECK(mixed.groups[1].diverged == 2);
  CHECK(mixed.table_text().find("✗") != std::string::npos);
  CHECK(res.rows[0].final_f == mixed.rows[0].final_f);
  fs::remove_all(dir);
}

TEST_CASE("config directories") {
  const fs::path dir = scratch_dir("cfgdir");
  std::ofstream(dir / "a.json") << small_config().dump();
  auto b = small_config();
  b["name"] = "other";
  std::ofstream(dir / "b.json") << b.dump();
  CHECK(load_config_dir(dir).size() == 2);
  std::ofstream(dir / "c.json") << small_config().dump();
  CHECK_THROWS_AS(load_config_dir(dir), ValidationError);
  std::ofstream(dir / "c.json") << "{ not json";
  CHECK_THROWS_AS(load_config_dir(dir), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("shipped configs parse") {
  std::size_t total = 0;
  for (const auto& sub : fs::directory_iterator(fs::path(HESSAVG_TEST_DIR) / ".." / "configs")) {
    if (!sub.is_directory()) continue;
    const auto all = load_config_dir(sub.path());
    for (const auto& c : all) CHECK(c.name.rfind(sub.path().filename().string(), 0) == 0);
    total += all.size();
  }
  CHECK(total == 8 + 30 + 16 + 2);
}

TEST_CASE("command line") {
  const fs::path dir = scratch_dir("cli");
  CHECK(run_cli("eec --epochs 1000 --rank 1 --hf 10") == 0);
  {
    const std::string cmd = std::string(HESSAVG_CLI) + " eec --epochs 1000 --rank 1 --hf 10 > " + (dir / "eec.txt").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(slurp(dir / "eec.txt") == "1202\n");
  }
  CHECK(run_cli("run " + (dir / "missing.cfg").string()) == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("") == 1);

  auto tiny = small_config();
  tiny["epochs"] = 20;
  tiny["trace"]["interval"] = 1;
  std::ofstream(dir / "tiny.json") << tiny.dump();
  CHECK(run_cli("run " + (dir / "tiny.json").string() + " --seed 4 --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "tiny_seed4.csv"));
  CHECK(run_cli("rates " + (dir / "out" / "tiny_seed4.csv").string() + " --col dist_to_opt --floor 0") == 0);
  CHECK(run_cli("rates " + (dir / "out" / "tiny_seed4.csv").string() + " --col nope") == 1);
  CHECK(run_cli("gen-quadratic --dim 4 --seed 2 --out " + (dir / "q.json").string()) == 0);
  const Json q = Json::parse(slurp(dir / "q.json"));
  CHECK(q["A"].size() == 4);
  CHECK(q["b"].size() == 4);

  std::ofstream(dir / "bad.json") << "{\"name\": \"x\", \"problem\": {\"type\": \"mnist\"}, \"optimizer\": {\"method\": \"sgd\"}}";
  CHECK(run_cli("run " + (dir / "bad.json").string()) == 1);
  fs::remove_all(dir);
}
