#include "qmb/cli/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

namespace qmb::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json vector_json(const RVec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i)))
      out.push_back("inf");
    else
      out.push_back(v(i));
  }
  return out;
}

RVec initial_beta(const RunConfig& cfg, const QuantumState& fixed_frame_state) {
  if (!cfg.fit_beta) return cfg.beta0;
  BetaFit fit = fit_beta(fixed_frame_state, cfg.dynamics.functional.terms, cfg.manifold, cfg.theta0);
  for (int k = 0; k < fit.beta.size(); ++k)
    if (!std::isfinite(fit.beta(k)))
      throw ConfigError("field 'functional.beta': the fitted weight is infinite (zero-temperature state)");
  return fit.beta;
}

json make_record(const RunConfig& cfg, Integrator& integ, const CoupledState& s, const RVec& diag) {
  json r;
  r["t"] = s.t;
  r["theta"] = vector_json(s.theta);
  if (s.beta.size() > 0) r["beta"] = vector_json(s.beta);
  r["norm_defect"] = s.norm_defect;
  json occ = json::array();
  for (size_t sub = 0; sub < cfg.model.dims.size(); ++sub) {
    RVec p = occupation_probabilities(s.sigma, static_cast<int>(sub));
    json row = json::array();
    for (int n = 0; n < p.size(); ++n) {
      double v = std::clamp(p(n), 0.0, 1.0);
      row.push_back(cfg.output.log10_occupations ? std::max(-300.0, std::log10(v)) : v);
    }
    occ.push_back(row);
  }
  r["occupations"] = occ;
  if (!cfg.output.expectations.empty()) {
    json ex = json::object();
    for (const auto& [name, op] : cfg.output.expectations) ex[name] = complex_json(integ.fixed_frame_expect(op, s));
    r["expect"] = ex;
  }
  const PenaltyFunctional& fn = cfg.dynamics.functional;
  RVec pops = s.sigma.populations();
  if (fn.kind == FunctionalKind::CGF) {
    r["value"] = log_mgf(pops, diag, fn.lambda);
  } else {
    r["value"] = pops.dot(diag);
  }
  if (cfg.output.chernoff_n0) {
    try {
      ChernoffResult c = chernoff_bound(pops, diag, *cfg.output.chernoff_n0);
      r["chernoff"] = {{"N0", c.N0}, {"lambda", c.lambda_star}, {"log_bound", c.log_tail_bound}};
    } catch (const BoundUnavailable&) {
      r["chernoff"] = nullptr;
    }
  }
  return r;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("QMB_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& job) {
  workers = std::clamp(workers, 1, std::max(1, n));
  std::atomic<int> next{0};
  std::exception_ptr first;
  int first_index = n;
  std::mutex mu;
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        job(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (k < first_index) {
          first_index = k;
          first = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

Trajectory simulate(const RunConfig& cfg, int k) {
  Integrator integ(cfg.model, cfg.manifold, cfg.dynamics);
  CoupledState s{cfg.initial_state(), cfg.theta0, RVec(), 0.0};
  if (cfg.dynamics.mode == CoordinateMode::GibbsProjection) {
    QuantumState fixed = cfg.manifold.empty() ? s.sigma : to_fixed_frame(cfg.manifold, cfg.theta0, s.sigma);
    s.beta = initial_beta(cfg, fixed);
    s.sigma = integ.reference_state(s.beta);
  }
  const RVec diag = penalty_diagonal(cfg.dynamics.functional, cfg.model.dims);
  NoisePath noise(trajectory_seed(cfg.seed, k));
  const auto kinds = cfg.model.unravelings();
  const std::vector<cplx> silent(kinds.size(), 0.0);
  Trajectory out;
  auto record = [&] {
    out.records.push_back(make_record(cfg, integ, s, diag));
    out.states.push_back({s.t, s.theta, s.sigma});
  };
  record();
  const int n = cfg.n_steps();
  for (int i = 1; i <= n; ++i) {
    try {
      s = cfg.deterministic ? integ.step(s, silent, cfg.dt) : integ.step(s, wiener(noise, kinds, cfg.dt), cfg.dt);
    } catch (const Error& e) {
      throw TrajectoryFailure(k, s.t, e.what());
    }
    if (i % cfg.output.stride == 0) record();
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (q < 0 || q > 1) throw InvalidArgument("percentile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  double pos = q * (values.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - lo;
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryRow> truncation_summary(const std::vector<std::vector<RVec>>& occupations, int max_level) {
  std::vector<SummaryRow> rows;
  for (size_t sub = 0; sub < occupations.size(); ++sub) {
    const auto& recs = occupations[sub];
    if (recs.empty()) continue;
    const int dim = static_cast<int>(recs.front().size());
    const int kmax = max_level > 0 ? std::min(max_level, dim) : dim;
    for (int K = 1; K <= kmax; ++K) {
      std::vector<double> err;
      err.reserve(recs.size());
      for (const auto& p : recs) err.push_back(std::max(0.0, 1.0 - p.head(K).sum()));
      double mean = 0.0;
      for (double e : err) mean += e;
      mean /= err.size();
      rows.push_back({static_cast<int>(sub), K, mean, percentile(err, 0.9)});
    }
  }
  return rows;
}

json meta_json(const RunConfig& cfg, const std::string& command) {
  json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = cfg.raw;
  m["effective"] = {{"dt", cfg.dt},
                    {"t_final", cfg.t_final},
                    {"n_steps", cfg.n_steps()},
                    {"master_seed", cfg.seed},
                    {"n_trajectories", cfg.n_trajectories}};
  m["seed_derivation"] = "splitmix64(master_seed + 0x9E3779B97F4A7C15 * (k + 1))";
  json seeds = json::array();
  for (int k = 0; k < cfg.n_trajectories; ++k) seeds.push_back(trajectory_seed(cfg.seed, k));
  m["trajectory_seeds"] = seeds;
  return m;
}

void run(const RunConfig& cfg, const std::filesystem::path& out_dir, int workers) {
  std::filesystem::create_directories(out_dir);
  const size_t nsub = cfg.model.dims.size();
  std::vector<std::vector<std::vector<RVec>>> occ(cfg.n_trajectories);
  parallel_for(cfg.n_trajectories, workers, [&](int k) {
    Trajectory tr = simulate(cfg, k);
    std::ofstream f(out_dir / ("traj_" + std::to_string(k) + ".jsonl"));
    for (const auto& r : tr.records) f << r.dump() << '\n';
    if (!f) throw Error("cannot write trajectory file for trajectory " + std::to_string(k));
    occ[k].resize(nsub);
    for (const auto& st : tr.states)
      for (size_t sub = 0; sub < nsub; ++sub)
        occ[k][sub].push_back(occupation_probabilities(st.sigma, static_cast<int>(sub)));
  });
  std::vector<std::vector<RVec>> merged(nsub);
  for (const auto& per_traj : occ)
    for (size_t sub = 0; sub < nsub; ++sub)
      merged[sub].insert(merged[sub].end(), per_traj[sub].begin(), per_traj[sub].end());

  std::ofstream csv(out_dir / "summary.csv");
  csv << "sub,K,mean,p90\n";
  for (const auto& r : truncation_summary(merged, cfg.output.max_level))
    csv << r.sub << ',' << r.K << ',' << format_double(r.mean) << ',' << format_double(r.p90) << '\n';
  std::ofstream meta(out_dir / "meta.json");
  meta << meta_json(cfg, "run").dump(2) << '\n';
  if (!csv || !meta) throw Error("cannot write output files in " + out_dir.string());
}

}  // namespace qmb::cli
