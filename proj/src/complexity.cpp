#include "qmb/complexity.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

namespace qmb {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double log_sum_exp(const RVec& x) {
  double mx = x.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((x.array() - mx).exp().sum());
}

// log p_i + λ v_i, with zero-probability entries sent to −∞.
RVec tilted_logs(const RVec& p, const RVec& v, double lambda) {
  RVec out(p.size());
  for (int i = 0; i < p.size(); ++i)
    out(i) = p(i) > 0.0 ? std::log(p(i)) + lambda * v(i) : -std::numeric_limits<double>::infinity();
  return out;
}

double tilted_mean(const RVec& p, const RVec& v, double lambda, double* variance = nullptr) {
  RVec l = tilted_logs(p, v, lambda);
  double z = log_sum_exp(l);
  RVec w = (l.array() - z).exp();
  double mean = w.dot(v);
  if (variance) *variance = w.dot((v.array() - mean).square().matrix());
  return mean;
}

RVec normalized_populations(const RVec& p) {
  double s = p.sum();
  if (!(s > 0.0)) throw InvalidArgument("distribution has no weight");
  return p / s;
}

// Populations below this are round-off from rotating amplitudes of order one.
constexpr double kOccupationFloor = 64 * DBL_EPSILON * 64 * DBL_EPSILON;

void check_cgf_divergence(const QuantumState& sigma, const PenaltyFunctional& fn, const RVec& diag) {
  const Dims& dims = sigma.dims();
  RVec pops = sigma.populations();
  RVec logs = tilted_logs(pops, diag, fn.lambda);
  double total = log_sum_exp(logs);
  for (const auto& t : fn.terms) {
    const int d = dims[t.sub];
    if (d < 7) continue;
    // Share of ⟨e^{λM}⟩ carried by the top level of this subsystem.
    RVec edge_logs(logs.size());
    for (int i = 0; i < logs.size(); ++i)
      edge_logs(i) = unflatten(i, dims)[t.sub] == d - 1 ? logs(i) : -std::numeric_limits<double>::infinity();
    if (std::exp(log_sum_exp(edge_logs) - total) <= 1e-12) continue;
    RVec occ = occupation_probabilities(sigma, t.sub);
    bool all = true;
    for (int n = d - 6; n < d - 1; ++n) {
      double ratio = occ(n) > kOccupationFloor && occ(n + 1) > kOccupationFloor ? occ(n + 1) / occ(n) : 0.0;
      double thresh = 0.999 * std::exp(-fn.lambda * t.weight * (t.f(n + 1) - t.f(n)));
      if (ratio < thresh) all = false;
    }
    if (all) throw CgfDivergence("CGF tail-ratio condition violated on subsystem " + std::to_string(t.sub));
  }
}

RVec functional_diag(const PenaltyFunctional& fn, const Dims& dims) {
  RVec m = penalty_diagonal(fn, dims);
  if (fn.kind == FunctionalKind::CGF) return (fn.lambda * m.array()).exp();
  return m;
}

}  // namespace

PenaltyFunctional PenaltyFunctional::number(int sub) {
  PenaltyFunctional f;
  f.terms.push_back({sub, 1.0, [](int n) { return static_cast<double>(n); }});
  return f;
}

PenaltyFunctional PenaltyFunctional::spectral(SpectralMap map, int sub) {
  PenaltyFunctional f;
  f.terms.push_back({sub, 1.0, std::move(map)});
  return f;
}

PenaltyFunctional PenaltyFunctional::total_number(const std::vector<int>& subs) {
  PenaltyFunctional f;
  for (int s : subs) f.terms.push_back({s, 1.0, [](int n) { return static_cast<double>(n); }});
  return f;
}

PenaltyFunctional PenaltyFunctional::cgf(double lam) const {
  PenaltyFunctional f = *this;
  f.kind = FunctionalKind::CGF;
  f.lambda = lam;
  f.validate();
  return f;
}

void PenaltyFunctional::validate() const {
  if (terms.empty()) throw InvalidArgument("penalty functional has no terms");
  for (const auto& t : terms) {
    if (!(t.weight > 0.0)) throw InvalidArgument("penalty weights must be positive");
    if (!t.f) throw InvalidArgument("missing spectral map");
  }
  if (kind == FunctionalKind::CGF && !(lambda > 0.0)) throw InvalidArgument("CGF parameter must be positive");
}

RVec penalty_diagonal(const std::vector<PenaltyTerm>& terms, const Dims& dims) {
  const int n = total_dim(dims);
  RVec m = RVec::Zero(n);
  for (const auto& t : terms) {
    if (t.sub < 0 || t.sub >= static_cast<int>(dims.size())) throw DimensionMismatch("penalty subsystem");
    std::vector<double> fv(dims[t.sub]);
    for (int k = 0; k < dims[t.sub]; ++k) {
      fv[k] = t.f(k);
      if (fv[k] < -1e-10) throw InvalidArgument("penalty operator must be nonnegative");
    }
    for (int i = 0; i < n; ++i) m(i) += t.weight * fv[unflatten(i, dims)[t.sub]];
  }
  return m;
}

RVec penalty_diagonal(const PenaltyFunctional& functional, const Dims& dims) {
  return penalty_diagonal(functional.terms, dims);
}

double log_mgf(const RVec& populations, const RVec& diag, double lambda) {
  return log_sum_exp(tilted_logs(normalized_populations(populations), diag, lambda));
}

double evaluate(const PenaltyFunctional& fn, const ManifoldSpec& spec, const RVec& theta, const QuantumState& state) {
  fn.validate();
  QuantumState sigma = to_moving_frame(spec, theta, state).normalized();
  RVec m = penalty_diagonal(fn, state.dims());
  RVec pops = sigma.populations();
  if (fn.kind == FunctionalKind::Expectation) return pops.dot(m);
  check_cgf_divergence(sigma, fn, m);
  return log_mgf(pops, m, fn.lambda);
}

CMat diag_commutator(const RVec& m, const CMat& X) {
  CMat out(X.rows(), X.cols());
  for (int j = 0; j < X.cols(); ++j)
    for (int i = 0; i < X.rows(); ++i) out(i, j) = (m(i) - m(j)) * X(i, j);
  return out;
}

cplx expect_commutator(const QuantumState& state, const CMat& A, const CMat& B) {
  if (state.is_pure()) {
    const CVec& v = state.vec();
    double w = v.squaredNorm();
    CVec av = A * v, bv = B * v;
    CVec adv = A.adjoint() * v, bdv = B.adjoint() * v;
    return (adv.dot(bv) - bdv.dot(av)) / w;
  }
  const CMat& r = state.rho();
  return ((r * A) * B - (r * B) * A).trace() / r.trace();
}

GradientHessianOps gradient_hessian_ops(const RVec& m, const std::vector<CMat>& F,
                                        const std::vector<std::vector<CMat>>& dF) {
  const int n = static_cast<int>(F.size());
  GradientHessianOps out;
  std::vector<CMat> Z(n);
  for (int k = 0; k < n; ++k) {
    Z[k] = diag_commutator(m, F[k]);
    out.Y.push_back(I * Z[k]);
  }
  out.H.assign(n, std::vector<CMat>(n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      out.H[j][k] = F[j] * Z[k] - Z[k] * F[j];
      if (dF[j][k].rows() > 0) out.H[j][k] += I * diag_commutator(m, dF[j][k]);
    }
  return out;
}

namespace {

std::vector<std::vector<CMat>> derivative_matrices(const ManifoldSpec& spec, const RVec& theta, const Dims& dims) {
  auto polys = generator_derivative_polys(spec, theta);
  std::vector<std::vector<CMat>> out(polys.size());
  for (size_t j = 0; j < polys.size(); ++j)
    for (const auto& p : polys[j]) out[j].push_back(p.is_zero() ? CMat() : p.matrix(dims));
  return out;
}

}  // namespace

GradientHessianOps gradient_hessian_ops(const PenaltyFunctional& fn, const ManifoldSpec& spec, const RVec& theta,
                                        const Dims& dims) {
  fn.validate();
  if (fn.kind != FunctionalKind::Expectation)
    throw InvalidArgument("gradient/Hessian operators are defined for expectation functionals");
  return gradient_hessian_ops(penalty_diagonal(fn, dims), right_generators(spec, theta, dims),
                              derivative_matrices(spec, theta, dims));
}

LocalModel gradient_hessian(const PenaltyFunctional& fn, const ManifoldSpec& spec, const RVec& theta,
                            const QuantumState& state) {
  fn.validate();
  const Dims& dims = state.dims();
  QuantumState sigma = to_moving_frame(spec, theta, state).normalized();
  RVec mraw = penalty_diagonal(fn, dims);
  if (fn.kind == FunctionalKind::CGF) check_cgf_divergence(sigma, fn, mraw);
  RVec m = functional_diag(fn, dims);
  auto F = right_generators(spec, theta, dims);
  auto dF = derivative_matrices(spec, theta, dims);
  const int n = static_cast<int>(F.size());

  LocalModel lm;
  lm.value = sigma.populations().dot(m);
  lm.gradient.resize(n);
  lm.hessian.resize(n, n);
  std::vector<CMat> Z(n);
  for (int k = 0; k < n; ++k) {
    Z[k] = diag_commutator(m, F[k]);
    lm.gradient(k) = (I * sigma.expect(Z[k])).real();
  }
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      auto entry = [&](int a, int b) {
        double v = expect_commutator(sigma, F[a], Z[b]).real();
        if (dF[a][b].rows() > 0) v += (I * sigma.expect(diag_commutator(m, dF[a][b]))).real();
        return v;
      };
      double h = 0.5 * (entry(j, k) + entry(k, j));
      lm.hessian(j, k) = lm.hessian(k, j) = h;
    }
  if (fn.kind == FunctionalKind::CGF) {
    double E = lm.value;
    RVec g = lm.gradient / E;
    lm.hessian = lm.hessian / E - g * g.transpose();
    lm.gradient = g;
    lm.value = std::log(E);
  }
  return lm;
}

RVec cgf_gradient(const PenaltyFunctional& fn, const ManifoldSpec& spec, const RVec& theta, const QuantumState& state) {
  if (fn.kind != FunctionalKind::CGF) throw InvalidArgument("cgf_gradient needs a CGF functional");
  return gradient_hessian(fn, spec, theta, state).gradient;
}

Optimum minimize(const PenaltyFunctional& fn, const ManifoldSpec& spec, const QuantumState& state, const RVec& theta0,
                 const MinimizeOptions& opts) {
  spec.check_point(theta0);
  Optimum best;
  RVec theta = theta0;
  for (int it = 0; it <= opts.max_iter; ++it) {
    LocalModel lm = gradient_hessian(fn, spec, theta, state);
    Eigen::SelfAdjointEigenSolver<RMat> es(lm.hessian);
    best.theta = theta;
    best.value = lm.value;
    best.gradient_norm = lm.gradient.norm();
    best.hessian_spectrum = es.eigenvalues();
    best.iterations = it;
    if (best.gradient_norm <= opts.tol) return best;
    if (it == opts.max_iter) break;

    RVec dir;
    if (es.eigenvalues().minCoeff() > 1e-10) {
      dir = -es.eigenvectors() * (es.eigenvectors().transpose() * lm.gradient).cwiseQuotient(es.eigenvalues());
    } else {
      dir = -opts.gd_step * lm.gradient;
      best.used_gradient_fallback = true;
    }
    double slope = lm.gradient.dot(dir);
    double t = 1.0;
    double slack = 1e-14 * (1.0 + std::abs(lm.value));
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      double fv;
      try {
        fv = evaluate(fn, spec, theta + t * dir, state);
      } catch (const CgfDivergence&) {
        fv = std::numeric_limits<double>::infinity();
      }
      if (fv <= lm.value + 1e-4 * t * slope + slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) throw NonConvergence("minimize: line search stalled", best.theta, best.gradient_norm);
    theta += t * dir;
  }
  throw NonConvergence("minimize: maximum iterations exceeded", best.theta, best.gradient_norm);
}

RVec closed_form_displacement(const QuantumState& state, const ManifoldSpec& spec) {
  RVec theta = RVec::Zero(spec.n_coords());
  int off = 0;
  for (const auto& f : spec.factors()) {
    if (f.kind != FactorKind::CoherentDisplacement)
      throw InvalidArgument("closed-form optimum exists only for coherent displacements");
    CMat a = embed(annihilation(state.dims()[f.sub]).mat(), state.dims(), f.sub);
    cplx alpha = state.expect(a);
    theta(off) = kSqrt2 * alpha.real();
    theta(off + 1) = kSqrt2 * alpha.imag();
    off += 2;
  }
  return theta;
}

RVec closed_form_displacement(const QuantumState& state) {
  if (state.dims().size() != 1) throw InvalidArgument("single-mode state expected");
  return closed_form_displacement(state, ManifoldSpec::coherent_displacement(0));
}

ConvexityReport convexity_check(const LongSpectralMap& f, int n_max) {
  if (n_max < 0) throw InvalidArgument("n_max must be nonnegative");
  ConvexityReport r;
  r.n_star = n_max + 1;
  auto d2 = [&](long double k) { return f(k + 2) - 2 * f(k + 1) + f(k); };
  const long double eps = 64 * LDBL_EPSILON;
  for (int n = 0; n <= n_max; ++n) {
    long double ln = n;
    long double delta = f(ln + 1) - f(ln);
    long double d2m1 = d2(ln - 1);
    long double gamma = delta + ln * d2m1;
    long double xi = ((ln + 1) * d2(ln) + (n > 0 ? ln * d2(ln - 2) : 0.0L)) / 2;
    r.delta2.push_back(d2m1);
    r.gamma.push_back(gamma);
    r.xi.push_back(xi);
    long double scale = std::fabs(gamma) + std::fabs(xi) + std::fabs(d2m1);
    bool ok1 = d2m1 >= -eps * scale;
    bool ok2 = gamma >= -eps * scale;
    bool ok3 = gamma - xi >= -eps * scale;
    if (!ok1) r.delta2_ok = false;
    if (!ok2) r.gamma_ok = false;
    if (!ok3) r.gamma_minus_xi_ok = false;
    if (!(ok1 && ok2 && ok3) && r.n_star == n_max + 1) r.n_star = n;
  }
  return r;
}

ChernoffResult chernoff_bound(const RVec& populations, const RVec& values, double N0, double cap) {
  if (populations.size() != values.size()) throw DimensionMismatch("distribution sizes");
  RVec p = normalized_populations(populations);
  auto cgf = [&](double lam) { return log_sum_exp(tilted_logs(p, values, lam)); };
  double mean = p.dot(values);
  if (N0 <= mean) return {0.0, 0.0, N0, false};
  double vmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) vmax = std::max(vmax, values(i));
  if (vmax <= N0) return {cap, cgf(cap) - cap * N0, N0, true};
  if (tilted_mean(p, values, cap) < N0)
    throw BoundUnavailable("Legendre condition not met before the λ cap");
  double lo = 0.0, hi = cap;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
    double mid = 0.5 * (lo + hi);
    (tilted_mean(p, values, mid) < N0 ? lo : hi) = mid;
  }
  double lam = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    double var = 0.0;
    double mu = tilted_mean(p, values, lam, &var);
    if (var <= 0.0) break;
    double next = lam - (mu - N0) / var;
    if (next < lo || next > hi) break;
    lam = next;
  }
  return {lam, cgf(lam) - lam * N0, N0, false};
}

ChernoffResult chernoff_truncation(const QuantumState& state, const ManifoldSpec& spec, const RVec& theta, double N0,
                                   const PenaltyFunctional& counting) {
  QuantumState sigma = to_moving_frame(spec, theta, state).normalized();
  return chernoff_bound(sigma.populations(), penalty_diagonal(counting, state.dims()), N0);
}

ChernoffResult chernoff_levels_for_accuracy(const RVec& populations, const RVec& values, double digits) {
  if (!(digits > 0)) throw InvalidArgument("accuracy digits must be positive");
  const double target = -digits * std::log(10.0);
  const int top = static_cast<int>(std::ceil(values.maxCoeff())) + 1;
  for (int n0 = 1; n0 <= top; ++n0) {
    ChernoffResult r = chernoff_bound(populations, values, n0);
    if (r.log_tail_bound <= target) return r;
  }
  throw BoundUnavailable("no level within the truncation reaches the requested accuracy");
}

double exact_tail(const RVec& populations, const RVec& values, double N0) {
  RVec p = normalized_populations(populations);
  double t = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (values(i) >= N0) t += p(i);
  return t;
}

std::pair<double, double> spin_hessian_eigs(const RVec& theta, const QuantumState& sigma) {
  if (theta.size() != 2) throw InvalidArgument("spin manifold has two coordinates");
  if (sigma.dims().size() != 1) throw InvalidArgument("single spin state expected");
  AngularMomentum j = angular_momentum(spin_from_dim(sigma.dims()[0]));
  double jz = sigma.expect(j.jz.mat()).real();
  double jx = sigma.expect(j.jx().mat()).real();
  double jy = sigma.expect(j.jy().mat()).real();
  double mu2 = theta.squaredNorm();
  double pref = 4.0 / ((1.0 + mu2) * (1.0 + mu2));
  double r = std::sqrt(mu2) * std::sqrt(jx * jx + jy * jy);
  return {pref * (-jz + r), pref * (-jz - r)};
}

}  // namespace qmb
