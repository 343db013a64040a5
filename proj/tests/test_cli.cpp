#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "qmb/cli/compare.hpp"
#include "qmb/cli/runner.hpp"

using namespace qmb;
using namespace qmb::cli;
namespace fs = std::filesystem;

namespace {

json cavity_config() {
  return json::parse(R"({
    "model": {"builder": "empty_cavity", "dim": 12, "omega": 1.0, "kappa": 1.0, "epsilon": [0.3, 0.0]},
    "manifold": {"factors": [{"kind": "displacement", "sub": 0}], "theta": [0.0, 0.0]},
    "functional": {"kind": "expectation"},
    "dynamics": {"mode": "gradient_flow", "dt": 0.01, "t_final": 0.2, "seed": 7, "n_trajectories": 4},
    "output": {"stride": 1, "expectations": ["a", "n"], "max_level": 6}
  })");
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("qmb_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const char* exe = std::getenv("QMB_CLI");
  REQUIRE(exe != nullptr);
  int rc = std::system((std::string(exe) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  RunConfig cfg = parse_config(cavity_config());
  CHECK(cfg.builder == "empty_cavity");
  CHECK(cfg.model.dims == Dims{12});
  CHECK(cfg.manifold.n_coords() == 2);
  CHECK(cfg.dt == 0.01);
  CHECK(cfg.n_steps() == 20);
  CHECK(cfg.seed == 7);
  CHECK(cfg.n_trajectories == 4);
  CHECK(cfg.output.expectations.size() == 2);
  CHECK(cfg.output.max_level == 6);
  CHECK(cfg.dynamics.mode == CoordinateMode::GradientFlow);

  json scaled = cavity_config();
  scaled["reference_rate"] = 2.0;
  RunConfig s = parse_config(scaled);
  CHECK(s.model.max_decay_rate() == doctest::Approx(2.0));
  CHECK(s.dt == doctest::Approx(0.005));
  CHECK(s.t_final == doctest::Approx(0.1));

  json fixed = cavity_config();
  fixed.erase("manifold");
  fixed["dynamics"]["mode"] = "fixed_basis";
  CHECK(parse_config(fixed).manifold.empty());

  apply_overrides(cfg, Overrides{99, 0.02, 0.4});
  CHECK(cfg.seed == 99);
  CHECK(cfg.n_steps() == 20);
}

TEST_CASE("config errors name the offending field") {
  json j = cavity_config();
  j["model"]["colour"] = 1;
  CHECK(config_error(j).find("model.colour") != std::string::npos);

  j = cavity_config();
  j["dynamics"].erase("dt");
  CHECK(config_error(j).find("dynamics.dt") != std::string::npos);

  j = cavity_config();
  j["model"]["unraveling"] = "photodetection";
  CHECK(config_error(j).find("model.unraveling") != std::string::npos);

  j = cavity_config();
  j["dynamics"]["mode"] = "gibbs_projection";
  CHECK(config_error(j).find("functional.beta") != std::string::npos);

  j = cavity_config();
  j.erase("manifold");
  CHECK(config_error(j).find("dynamics.mode") != std::string::npos);

  j = cavity_config();
  j["dynamics"]["t_final"] = 0.001;
  CHECK(config_error(j).find("dynamics.t_final") != std::string::npos);

  j = cavity_config();
  j["output"]["max_level"] = 50;
  CHECK(config_error(j).find("output.max_level") != std::string::npos);

  j = cavity_config();
  j["model"]["builder"] = "kerr_network";
  CHECK_FALSE(config_error(j).empty());

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  fs::path dir = scratch("parse_error");
  std::ofstream(dir / "bad.json") << "{\"model\": ";
  CHECK_THROWS_AS(load_config((dir / "bad.json").string()), ConfigError);
}

TEST_CASE("multi-mode configs") {
  json j = json::parse(R"({
    "model": {"builder": "kerr_network", "modes": 2, "dim_per_mode": 5,
              "terms": [{"kind": "kerr", "mode": 0, "coeff": 0.2},
                        {"kind": "beamsplitter", "mode": 0, "other": 1, "coeff": [0.1, 0.05]}],
              "losses": [{"mode": 0, "rate": 0.5}, {"mode": 1, "rate": 0.3, "unraveling": "homodyne"}]},
    "manifold": {"factors": [{"kind": "displacement", "sub": 0}, {"kind": "displacement", "sub": 1}]},
    "dynamics": {"mode": "gradient_flow", "dt": 0.01, "t_final": 0.05}
  })");
  RunConfig cfg = parse_config(j);
  CHECK(cfg.model.dims == Dims{5, 5});
  CHECK(cfg.model.unravelings() == std::vector<Unraveling>{Unraveling::Heterodyne, Unraveling::Homodyne});
  CHECK(cfg.theta0.size() == 4);

  j["model"]["losses"][0]["observed"] = false;
  CHECK(config_error(j).find("model.losses") != std::string::npos);
}

TEST_CASE("operator names") {
  CHECK((parse_operator("a") - ops::a()).is_zero());
  CHECK((parse_operator("n:1") - ops::n(1)).is_zero());
  CHECK((parse_operator("jz:2") - ops::jz(2)).is_zero());
  CHECK_THROWS(parse_operator("b"));
  CHECK_THROWS(parse_operator("a:x"));
  CHECK_THROWS(parse_operator("a:-1"));
}

TEST_CASE("trajectory seeds follow splitmix64") {
  // Reference outputs of the splitmix64 generator started from state 0.
  CHECK(trajectory_seed(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(trajectory_seed(0, 1) == 0x6E789E6AA1B965F4ULL);
  CHECK(trajectory_seed(0, 2) == 0x06C45D188009454FULL);
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < 100; ++k) seeds.push_back(trajectory_seed(12345, k));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("percentiles") {
  CHECK(percentile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(percentile({4, 1, 3, 2}, 0.9) == doctest::Approx(3.7));
  CHECK(percentile({5}, 0.9) == 5.0);
  CHECK(percentile({3, 1, 2}, 0.0) == 1.0);
  CHECK(percentile({3, 1, 2}, 1.0) == 3.0);
  CHECK_THROWS(percentile({}, 0.5));
  CHECK_THROWS(percentile({1.0}, 1.5));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(1 + trial * 7);
    for (auto& x : v) x = u(rng);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    double p = percentile(v, 0.9);
    int below = static_cast<int>(std::count_if(v.begin(), v.end(), [&](double x) { return x <= p + 1e-15; }));
    CHECK(below >= static_cast<int>(std::ceil(0.9 * (v.size() - 1))));
    CHECK(p >= sorted.front());
    CHECK(p <= sorted.back());
  }
}

TEST_CASE("truncation summary") {
  RVec a(3), b(3);
  a << 0.5, 0.3, 0.2;
  b << 1.0, 0.0, 0.0;
  auto rows = truncation_summary({{a, b}}, 0);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].K == 1);
  CHECK(rows[0].mean == doctest::Approx(0.25));
  CHECK(rows[0].p90 == doctest::Approx(0.45));
  CHECK(rows[1].mean == doctest::Approx(0.1));
  CHECK(rows[2].mean == doctest::Approx(0.0));
  CHECK(truncation_summary({{a, b}}, 2).size() == 2);
}

TEST_CASE("worker pool") {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](int k) { hits[k]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_WITH(parallel_for(10, 3,
                                 [](int k) {
                                   if (k == 4 || k == 7) throw Error("job " + std::to_string(k));
                                 }),
                    "job 4");
  setenv("QMB_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  unsetenv("QMB_WORKERS");
  CHECK(default_workers() >= 1);
}

TEST_CASE("runs are reproducible across worker counts") {
  RunConfig cfg = parse_config(cavity_config());
  fs::path one = scratch("det_one"), many = scratch("det_many");
  run(cfg, one, 1);
  run(cfg, many, 3);
  for (const char* name : {"traj_0.jsonl", "traj_1.jsonl", "traj_2.jsonl", "traj_3.jsonl", "summary.csv", "meta.json"}) {
    REQUIRE(fs::exists(one / name));
    CHECK(slurp(one / name) == slurp(many / name));
  }
  CHECK(slurp(one / "traj_0.jsonl") != slurp(one / "traj_1.jsonl"));

  json meta = json::parse(slurp(one / "meta.json"));
  CHECK(meta["trajectory_seeds"][2].get<std::uint64_t>() == trajectory_seed(7, 2));
  CHECK(meta["effective"]["n_steps"] == 20);

  auto recs = read_jsonl(one / "traj_0.jsonl");
  CHECK(recs.size() == 21);
  CHECK(recs.front()["t"] == 0.0);
  CHECK(recs.back()["t"].get<double>() == doctest::Approx(0.2));
  CHECK(recs.front()["expect"]["n"][0].get<double>() == doctest::Approx(0.0));

  std::string summary = slurp(one / "summary.csv");
  CHECK(summary.rfind("sub,K,mean,p90\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 7);
}

TEST_CASE("record stride subsamples the trajectory") {
  json j = cavity_config();
  j["dynamics"]["n_trajectories"] = 1;
  RunConfig every = parse_config(j);
  j["output"]["stride"] = 2;
  RunConfig half = parse_config(j);
  Trajectory a = simulate(every, 0), b = simulate(half, 0);
  REQUIRE(b.records.size() == 11);
  for (size_t i = 0; i < b.records.size(); ++i) CHECK(b.records[i] == a.records[2 * i]);
}

TEST_CASE("static basis leaves the vacuum untouched") {
  const int d = 8;
  std::vector<QuantumState> states{fock_state(d, 0), fock_state(d, 0)};
  auto rows = compare_table({BasisChoice::parse("static")}, states, 0, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].basis == "static");
  CHECK(rows[0].K == 1);
  CHECK(rows[0].mean == 0.0);

  std::vector<QuantumState> coh{coherent_state(30, cplx(1.0, 0.5)).normalized()};
  auto both = compare_table({BasisChoice::parse("static"), BasisChoice::parse("displaced_exmin")}, coh, 0, 1);
  REQUIRE(both.size() == 2);
  CHECK(both[0].mean > 0.5);
  CHECK(both[1].mean < 1e-8);

  CHECK(BasisChoice::parse("displaced_cgf(0.5)").lambda == 0.5);
  CHECK_THROWS(BasisChoice::parse("rotated"));
}

TEST_CASE("command-line tool") {
  fs::path dir = scratch("binary");
  json j = cavity_config();
  j["dynamics"]["n_trajectories"] = 2;
  std::ofstream(dir / "cfg.json") << j.dump(2);
  const std::string cfg = (dir / "cfg.json").string();

  CHECK(run_cli("validate " + cfg) == 0);
  CHECK(run_cli("run " + cfg + " --out-dir " + (dir / "out").string() + " --workers 2 --seed 3 --t-final 0.1") == 0);
  CHECK(fs::exists(dir / "out" / "traj_1.jsonl"));
  CHECK(fs::exists(dir / "out" / "summary.csv"));
  json meta = json::parse(slurp(dir / "out" / "meta.json"));
  CHECK(meta["effective"]["master_seed"] == 3);
  CHECK(meta["effective"]["n_steps"] == 10);
  CHECK(read_jsonl(dir / "out" / "traj_0.jsonl").size() == 11);

  CHECK(run_cli("compare-bases " + cfg + " --bases static,displaced_exmin --out-dir " + (dir / "cmp").string()) == 0);
  std::string table = slurp(dir / "cmp" / "compare.csv");
  CHECK(table.rfind("basis,K,mean,p90\n", 0) == 0);
  CHECK(table.find("displaced_exmin,1,") != std::string::npos);

  json bad = j;
  bad["model"]["dim"] = "twelve";
  std::ofstream(dir / "bad.json") << bad.dump();
  CHECK(run_cli("validate " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("run " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("bogus") != 0);
}
