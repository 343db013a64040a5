#include "qmb/gibbs.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace qmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBetaLo = 1e-6;
constexpr double kBetaHi = 50.0;

// Eigen's vectorized exp maps −∞ to a denormal; zero-temperature weights must vanish exactly.
RVec exp_of(const RVec& x) {
  return x.unaryExpr([](double v) { return std::exp(v); });
}

double log_sum_exp(const RVec& x) {
  double mx = x.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((x.array() - mx).exp().sum());
}

// Penalty diagonal of one term, shifted so that its ground value is 0.
RVec shifted_diag(const PenaltyTerm& t, const Dims& dims) {
  RVec m = penalty_diagonal(std::vector<PenaltyTerm>{t}, dims);
  return m.array() - m.minCoeff();
}

RVec log_weights(const std::vector<RVec>& diags, const RVec& beta) {
  RVec e = RVec::Zero(diags.empty() ? 0 : diags[0].size());
  for (size_t k = 0; k < diags.size(); ++k) {
    if (std::isinf(beta(k))) {
      for (int i = 0; i < e.size(); ++i)
        if (diags[k](i) > 1e-12) e(i) = -kInf;
    } else {
      e -= beta(k) * diags[k];
    }
  }
  return e;
}

void check_beta(const std::vector<PenaltyTerm>& penalties, const RVec& beta) {
  if (beta.size() != static_cast<Eigen::Index>(penalties.size())) throw InvalidArgument("one weight per penalty");
  for (int k = 0; k < beta.size(); ++k)
    if (!(beta(k) > 0.0)) throw InvalidArgument("Gibbs weights must be positive");
}

// Level values w·f(n) of a term on its own subsystem.
RVec level_values(const PenaltyTerm& t, int dim) {
  RVec v(dim);
  for (int n = 0; n < dim; ++n) v(n) = t.weight * t.f(n);
  return v;
}

double thermal_mean(const RVec& v, double beta, double* var = nullptr) {
  RVec l = -beta * (v.array() - v.minCoeff());
  double z = log_sum_exp(l);
  RVec w = (l.array() - z).exp();
  double mean = w.dot(v);
  if (var) *var = w.dot((v.array() - mean).square().matrix());
  return mean;
}

}  // namespace

RVec gibbs_populations(const std::vector<PenaltyTerm>& penalties, const RVec& beta, const Dims& dims,
                       bool check_tail) {
  check_beta(penalties, beta);
  std::vector<RVec> diags;
  for (const auto& t : penalties) diags.push_back(shifted_diag(t, dims));
  RVec e = log_weights(diags, beta);
  RVec p = exp_of(e.array() - log_sum_exp(e));
  if (check_tail) {
    std::vector<double> edge(dims.size(), 0.0);
    for (int i = 0; i < p.size(); ++i) {
      std::vector<int> levels = unflatten(i, dims);
      for (size_t sub = 0; sub < dims.size(); ++sub)
        if (levels[sub] == dims[sub] - 1) edge[sub] += p(i);
    }
    for (size_t sub = 0; sub < dims.size(); ++sub)
      if (edge[sub] > 1e-10)
        throw InsufficientDimension("Gibbs weight " + std::to_string(edge[sub]) + " on the top level of subsystem " +
                                    std::to_string(sub));
  }
  return p;
}

QuantumState gibbs_state(const GibbsSpec& g, const Dims& dims, bool check_tail) {
  RVec p = gibbs_populations(g.penalties, g.beta, dims, check_tail);
  QuantumState chi = QuantumState::mixed(p.cast<cplx>().asDiagonal(), dims);
  if (g.theta.size() == 0 || g.spec.empty()) return chi;
  return to_fixed_frame(g.spec, g.theta, chi);
}

double log_partition(const std::vector<PenaltyTerm>& penalties, const RVec& beta, const Dims& dims) {
  check_beta(penalties, beta);
  std::vector<RVec> diags;
  double ground = 0.0;
  for (size_t k = 0; k < penalties.size(); ++k) {
    RVec m = penalty_diagonal(std::vector<PenaltyTerm>{penalties[k]}, dims);
    if (!std::isinf(beta(k))) ground += beta(k) * m.minCoeff();
    diags.push_back(m.array() - m.minCoeff());
  }
  return log_sum_exp(log_weights(diags, beta)) - ground;
}

double relative_entropy(const QuantumState& rho, const GibbsSpec& g) {
  const Dims& dims = rho.dims();
  QuantumState sigma = (g.theta.size() == 0 || g.spec.empty()) ? rho.normalized()
                                                                 : to_moving_frame(g.spec, g.theta, rho).normalized();
  check_beta(g.penalties, g.beta);
  RVec pops = sigma.populations();
  std::vector<RVec> diags;
  double energy = 0.0;
  for (size_t k = 0; k < g.penalties.size(); ++k) {
    RVec m = shifted_diag(g.penalties[k], dims);
    double mean = pops.dot(m);
    if (std::isinf(g.beta(k))) {
      if (mean > 1e-12) return kInf;
    } else {
      energy += g.beta(k) * mean;
    }
    diags.push_back(std::move(m));
  }
  double lnz = log_sum_exp(log_weights(diags, g.beta));
  return -von_neumann_entropy(sigma) + lnz + energy;
}

double relative_entropy_direct(const QuantumState& rho, const QuantumState& chi) {
  CMat r = rho.normalized().density();
  CMat c = chi.normalized().density();
  Eigen::SelfAdjointEigenSolver<CMat> er(0.5 * (r + r.adjoint()));
  Eigen::SelfAdjointEigenSolver<CMat> ec(0.5 * (c + c.adjoint()));
  double s = 0.0;
  for (int i = 0; i < er.eigenvalues().size(); ++i) {
    double l = er.eigenvalues()(i);
    if (l > 1e-14) s += l * std::log(l);
  }
  RVec lc = ec.eigenvalues();
  RVec loglc(lc.size());
  for (int i = 0; i < lc.size(); ++i) loglc(i) = std::log(std::max(lc(i), 1e-300));
  CMat logchi = ec.eigenvectors() * loglc.cast<cplx>().asDiagonal() * ec.eigenvectors().adjoint();
  // Support of ρ outside that of χ gives +∞.
  for (int i = 0; i < lc.size(); ++i)
    if (lc(i) < 1e-300) {
      CVec v = ec.eigenvectors().col(i);
      if ((v.adjoint() * r * v)(0).real() > 1e-12) return kInf;
    }
  return s - (r * logchi).trace().real();
}

BetaFit fit_beta(const QuantumState& rho, const std::vector<PenaltyTerm>& penalties, const ManifoldSpec& spec,
                 const RVec& theta) {
  const Dims& dims = rho.dims();
  QuantumState sigma = (theta.size() == 0 || spec.empty()) ? rho.normalized()
                                                             : to_moving_frame(spec, theta, rho).normalized();
  const int e = static_cast<int>(penalties.size());
  BetaFit fit;
  fit.beta = RVec::Zero(e);
  fit.zero_temperature.assign(e, false);
  std::map<int, std::vector<int>> by_sub;
  for (int k = 0; k < e; ++k) by_sub[penalties[k].sub].push_back(k);

  for (const auto& [sub, idx] : by_sub) {
    RVec occ = occupation_probabilities(sigma, sub);
    const int d = dims[sub];
    if (idx.size() == 1) {
      const int k = idx[0];
      RVec v = level_values(penalties[k], d);
      double target = occ.dot(v);
      double vmin = v.minCoeff();
      double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
      if (target - vmin <= 1e-12 * scale || target < thermal_mean(v, kBetaHi)) {
        fit.beta(k) = kInf;
        fit.zero_temperature[k] = true;
        continue;
      }
      if (target >= thermal_mean(v, kBetaLo))
        throw DegenerateFit("penalty expectation at the top of the achievable range");
      double lo = std::log(kBetaLo), hi = std::log(kBetaHi);
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (thermal_mean(v, std::exp(mid)) > target ? lo : hi) = mid;
      }
      double b = std::exp(0.5 * (lo + hi));
      for (int it = 0; it < 3; ++it) {
        double var = 0.0;
        double mu = thermal_mean(v, b, &var);
        if (var <= 0.0) break;
        double next = b + (mu - target) / var;
        if (!(next > 0.0)) break;
        b = next;
      }
      fit.beta(k) = b;
      continue;
    }

    // Penalties sharing a subsystem: damped Newton on the convex dual ln Z(β) + β·m.
    fit.experimental = true;
    const int c = static_cast<int>(idx.size());
    std::vector<RVec> vals;
    RVec target(c);
    for (int a = 0; a < c; ++a) {
      vals.push_back(level_values(penalties[idx[a]], d));
      target(a) = occ.dot(vals[a]);
    }
    auto dual = [&](const RVec& b, RVec* mean, RMat* cov) {
      RVec l = RVec::Zero(d);
      double shift = 0.0;
      for (int a = 0; a < c; ++a) {
        l -= b(a) * (vals[a].array() - vals[a].minCoeff()).matrix();
        shift += b(a) * vals[a].minCoeff();
      }
      double z = log_sum_exp(l);
      RVec w = exp_of(l.array() - z);
      if (mean) {
        mean->resize(c);
        for (int a = 0; a < c; ++a) (*mean)(a) = w.dot(vals[a]);
      }
      if (cov) {
        cov->resize(c, c);
        for (int a = 0; a < c; ++a)
          for (int k = 0; k < c; ++k)
            (*cov)(a, k) = w.dot(((vals[a].array() - (*mean)(a)) * (vals[k].array() - (*mean)(k))).matrix());
      }
      return z - shift + b.dot(target);
    };
    RVec b(c);
    for (int a = 0; a < c; ++a) b(a) = 1.0 / (c * std::max(target(a) - vals[a].minCoeff(), 1e-3));
    RVec mean;
    RMat cov;
    double f = dual(b, &mean, &cov);
    for (int it = 0; it < 500 && (target - mean).norm() > 1e-12 * (1.0 + target.norm()); ++it) {
      RVec g = target - mean;
      RVec step = -cov.ldlt().solve(g);
      if (!step.allFinite() || step.dot(g) >= 0) step = -g;
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        RVec trial = b + t * step;
        if ((trial.array() <= 0).any()) continue;
        double ft = dual(trial, nullptr, nullptr);
        if (ft <= f + 1e-4 * t * step.dot(g)) {
          b = trial;
          moved = true;
          break;
        }
      }
      if (!moved) throw DegenerateFit("coupled weight fit stalled");
      f = dual(b, &mean, &cov);
    }
    if ((target - mean).norm() > 1e-9 * (1.0 + target.norm())) throw DegenerateFit("coupled weight fit did not converge");
    for (int a = 0; a < c; ++a) fit.beta(idx[a]) = b(a);
  }
  return fit;
}

QuadraticExpansion quadratic_expansion(const QuantumState& rho, const GibbsSpec& g) {
  const Dims& dims = rho.dims();
  check_beta(g.penalties, g.beta);
  for (int k = 0; k < g.beta.size(); ++k)
    if (std::isinf(g.beta(k))) throw InvalidArgument("quadratic expansion needs finite weights");
  RVec theta = g.theta.size() == 0 ? RVec::Zero(g.spec.n_coords()) : g.theta;
  QuantumState sigma = g.spec.empty() ? rho.normalized() : to_moving_frame(g.spec, theta, rho).normalized();
  RVec chi = gibbs_populations(g.penalties, g.beta, dims, false);
  const int e = static_cast<int>(g.penalties.size());
  const int n = g.spec.n_coords();
  std::vector<CMat> F;
  std::vector<std::vector<CMat>> dF(n, std::vector<CMat>(n));
  if (n > 0) {
    F = right_generators(g.spec, theta, dims);
    auto dp = generator_derivative_polys(g.spec, theta);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (!dp[j][k].is_zero()) dF[j][k] = dp[j][k].matrix(dims);
  }
  QuadraticExpansion qe;
  qe.z.resize(e);
  qe.y_kj.resize(e, n);
  qe.h = RMat::Zero(n, n);
  qe.g.resize(e, e);
  RVec pops = sigma.populations();
  std::vector<RVec> diags;
  for (int k = 0; k < e; ++k) diags.push_back(penalty_diagonal(std::vector<PenaltyTerm>{g.penalties[k]}, dims));
  for (int k = 0; k < e; ++k) {
    qe.z(k) = pops.dot(diags[k]) - chi.dot(diags[k]);
    if (n == 0) continue;
    GradientHessianOps ops = gradient_hessian_ops(diags[k], F, dF);
    for (int j = 0; j < n; ++j) qe.y_kj(k, j) = sigma.expect(ops.Y[j]).real();
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) qe.h(j, l) += g.beta(k) * 0.5 * (sigma.expect(ops.H[j][l]) + sigma.expect(ops.H[l][j])).real();
  }
  for (int k = 0; k < e; ++k)
    for (int m = 0; m < e; ++m) {
      double mk = chi.dot(diags[k]), mm = chi.dot(diags[m]);
      qe.g(k, m) = chi.dot(((diags[k].array() - mk) * (diags[m].array() - mm)).matrix());
    }
  qe.y = qe.y_kj.transpose() * g.beta;
  return qe;
}

}  // namespace qmb
