#include "qmb/cli/compare.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "qmb/cli/runner.hpp"

namespace qmb::cli {

BasisChoice BasisChoice::parse(const std::string& s) {
  BasisChoice b;
  b.label = s;
  if (s == "static") return b;
  if (s == "displaced_exmin") {
    b.kind = Kind::DisplacedExmin;
    return b;
  }
  if (s == "displaced_squeezed_exmin") {
    b.kind = Kind::DisplacedSqueezedExmin;
    return b;
  }
  const std::string prefix = "displaced_cgf(";
  if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size() + 1 && s.back() == ')') {
    std::string arg = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    try {
      size_t used = 0;
      b.lambda = std::stod(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw ConfigError("bad λ in basis '" + s + "'");
    }
    if (!(b.lambda > 0)) throw ConfigError("λ must be positive in basis '" + s + "'");
    b.kind = Kind::DisplacedCgf;
    return b;
  }
  throw ConfigError("unknown basis '" + s +
                    "' (expected static, displaced_exmin, displaced_squeezed_exmin or displaced_cgf(λ))");
}

namespace {

// CGF value with diverging points mapped to +∞.
double cgf_value(const PenaltyFunctional& fn, const ManifoldSpec& spec, const RVec& theta, const QuantumState& state) {
  try {
    return evaluate(fn, spec, theta, state);
  } catch (const CgfDivergence&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Nelder–Mead on the evaluated functional.
RVec polish(const PenaltyFunctional& fn, const ManifoldSpec& spec, const QuantumState& state, const RVec& theta0) {
  const int n = static_cast<int>(theta0.size());
  std::vector<RVec> x(n + 1, theta0);
  std::vector<double> f(n + 1);
  for (int j = 0; j < n; ++j) x[j + 1](j) += 0.05;
  for (int j = 0; j <= n; ++j) f[j] = cgf_value(fn, spec, x[j], state);
  for (int it = 0; it < 400; ++it) {
    std::vector<int> order(n + 1);
    for (int j = 0; j <= n; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
    std::vector<RVec> xs;
    std::vector<double> fs;
    for (int j : order) {
      xs.push_back(x[j]);
      fs.push_back(f[j]);
    }
    x = xs;
    f = fs;
    double diam = 0.0;
    for (int j = 1; j <= n; ++j) diam = std::max(diam, (x[j] - x[0]).cwiseAbs().maxCoeff());
    if (diam < 1e-8) break;
    RVec centroid = RVec::Zero(n);
    for (int j = 0; j < n; ++j) centroid += x[j] / n;
    RVec xr = centroid + (centroid - x[n]);
    double fr = cgf_value(fn, spec, xr, state);
    if (fr < f[0]) {
      RVec xe = centroid + 2.0 * (centroid - x[n]);
      double fe = cgf_value(fn, spec, xe, state);
      if (fe < fr) {
        x[n] = xe;
        f[n] = fe;
      } else {
        x[n] = xr;
        f[n] = fr;
      }
    } else if (fr < f[n - 1]) {
      x[n] = xr;
      f[n] = fr;
    } else {
      RVec xc = centroid + 0.5 * (x[n] - centroid);
      double fc = cgf_value(fn, spec, xc, state);
      if (fc < f[n]) {
        x[n] = xc;
        f[n] = fc;
      } else {
        for (int j = 1; j <= n; ++j) {
          x[j] = x[0] + 0.5 * (x[j] - x[0]);
          f[j] = cgf_value(fn, spec, x[j], state);
        }
      }
    }
  }
  int best = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
  return x[best];
}

// Newton from the warm (or mean-displacement) start and the origin, then a derivative-free
// polish of the lowest point. Round-off in the e^{λN} tail limits how far the
// gradient can be driven down, so Newton alone may stall.
RVec cgf_optimum(const PenaltyFunctional& fn, const ManifoldSpec& spec, const QuantumState& state, const RVec& warm) {
  std::vector<RVec> starts;
  starts.push_back(warm.size() == 2 ? warm : closed_form_displacement(state, spec));
  starts.push_back(RVec::Zero(2));
  MinimizeOptions opts;
  opts.max_iter = 12;
  RVec best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    RVec theta = start;
    try {
      Optimum opt = minimize(fn, spec, state, start, opts);
      theta = opt.theta;
    } catch (const NonConvergence& e) {
      if (e.best_iterate.size() == start.size()) theta = e.best_iterate;
    } catch (const CgfDivergence&) {
    }
    double v = cgf_value(fn, spec, theta, state);
    if (v < best_value) {
      best_value = v;
      best = theta;
    }
  }
  if (best.size() == 0) throw NonConvergence("CGF minimization failed from every start", RVec());
  return polish(fn, spec, state, best);
}

}  // namespace

RVec basis_occupations(const BasisChoice& basis, const QuantumState& state, int sub, RVec& warm) {
  switch (basis.kind) {
    case BasisChoice::Kind::Static:
      return occupation_probabilities(state, sub);
    case BasisChoice::Kind::DisplacedExmin: {
      ManifoldSpec spec = ManifoldSpec::coherent_displacement(sub);
      RVec theta = closed_form_displacement(state, spec);
      return occupation_probabilities(to_moving_frame(spec, theta, state), sub);
    }
    case BasisChoice::Kind::DisplacedSqueezedExmin: {
      ManifoldSpec spec = ManifoldSpec::displaced_squeezed(sub);
      RVec theta0 = warm;
      if (theta0.size() != 2) {
        theta0 = RVec::Zero(2);
        theta0(0) = closed_form_displacement(state, ManifoldSpec::coherent_displacement(sub))(0);
      }
      Optimum opt = minimize(PenaltyFunctional::number(sub), spec, state, theta0);
      warm = opt.theta;
      return occupation_probabilities(to_moving_frame(spec, opt.theta, state), sub);
    }
    case BasisChoice::Kind::DisplacedCgf: {
      ManifoldSpec spec = ManifoldSpec::coherent_displacement(sub);
      RVec theta = cgf_optimum(PenaltyFunctional::number(sub).cgf(basis.lambda), spec, state, warm);
      warm = theta;
      return occupation_probabilities(to_moving_frame(spec, theta, state), sub);
    }
  }
  throw InvalidArgument("unknown basis kind");
}

namespace {

// errors[K−1][i] for every state i.
std::vector<std::vector<double>> basis_errors(const BasisChoice& basis, const std::vector<QuantumState>& states,
                                              int sub, int max_level) {
  std::vector<std::vector<double>> err(max_level);
  RVec warm;
  for (const auto& st : states) {
    RVec p = basis_occupations(basis, st, sub, warm);
    for (int K = 1; K <= max_level; ++K) err[K - 1].push_back(std::max(0.0, 1.0 - p.head(K).sum()));
  }
  return err;
}

std::vector<BasisRow> rows_from_errors(const std::string& label, const std::vector<std::vector<double>>& err) {
  std::vector<BasisRow> rows;
  for (size_t K = 1; K <= err.size(); ++K) {
    const auto& e = err[K - 1];
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= e.size();
    rows.push_back({label, static_cast<int>(K), mean, percentile(e, 0.9)});
  }
  return rows;
}

int level_limit(int max_level, int dim) { return max_level > 0 ? std::min(max_level, dim) : dim; }

}  // namespace

std::vector<BasisRow> compare_table(const std::vector<BasisChoice>& bases, const std::vector<QuantumState>& states,
                                    int sub, int max_level) {
  if (states.empty()) throw InvalidArgument("no states to compare");
  const int kmax = level_limit(max_level, states.front().dims().at(sub));
  std::vector<BasisRow> rows;
  for (const auto& b : bases) {
    auto r = rows_from_errors(b.label, basis_errors(b, states, sub, kmax));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

void compare_bases(const RunConfig& cfg, const std::vector<BasisChoice>& bases, const std::filesystem::path& out_dir,
                   int workers) {
  if (bases.empty()) throw ConfigError("no bases given");
  std::filesystem::create_directories(out_dir);
  const int sub = cfg.manifold.empty() ? 0 : cfg.manifold.factors().front().sub;
  const int kmax = level_limit(cfg.output.max_level, cfg.model.dims.at(sub));
  // per trajectory, per basis: errors[K−1][record]
  std::vector<std::vector<std::vector<std::vector<double>>>> errs(cfg.n_trajectories);
  parallel_for(cfg.n_trajectories, workers, [&](int k) {
    Trajectory tr = simulate(cfg, k);
    std::vector<QuantumState> fixed;
    for (const auto& st : tr.states)
      fixed.push_back(cfg.manifold.empty() ? st.sigma : to_fixed_frame(cfg.manifold, st.theta, st.sigma));
    for (const auto& b : bases) errs[k].push_back(basis_errors(b, fixed, sub, kmax));
  });
  std::ofstream csv(out_dir / "compare.csv");
  csv << "basis,K,mean,p90\n";
  for (size_t bi = 0; bi < bases.size(); ++bi) {
    std::vector<std::vector<double>> merged(kmax);
    for (const auto& per : errs)
      for (int K = 0; K < kmax; ++K) merged[K].insert(merged[K].end(), per[bi][K].begin(), per[bi][K].end());
    for (const auto& r : rows_from_errors(bases[bi].label, merged)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g", r.K, r.mean, r.p90);
      csv << r.basis << ',' << buf << '\n';
    }
  }
  json meta = meta_json(cfg, "compare-bases");
  json labels = json::array();
  for (const auto& b : bases) labels.push_back(b.label);
  meta["bases"] = labels;
  meta["subsystem"] = sub;
  std::ofstream m(out_dir / "meta.json");
  m << meta.dump(2) << '\n';
  if (!csv || !m) throw Error("cannot write output files in " + out_dir.string());
}

}  // namespace qmb::cli
