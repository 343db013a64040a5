#include "qmb/dynamics.hpp"

#include <cmath>
#include <limits>

namespace qmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Normalized expectation values with shortcuts for pure and diagonal states.
class Averager {
 public:
  explicit Averager(const QuantumState& s) {
    if (s.is_pure()) {
      kind_ = Kind::Pure;
      v_ = s.vec() / s.vec().norm();
    } else if (s.rho().isDiagonal(0.0)) {
      kind_ = Kind::Diagonal;
      p_ = s.rho().diagonal().real() / s.rho().trace().real();
    } else {
      kind_ = Kind::General;
      r_ = s.rho() / s.rho().trace();
    }
  }

  cplx operator()(const CMat& A) const {
    switch (kind_) {
      case Kind::Pure: return v_.dot(A * v_);
      case Kind::Diagonal: return (p_.cast<cplx>().array() * A.diagonal().array()).sum();
      default: return (r_.array() * A.transpose().array()).sum();
    }
  }

  // ⟨AB⟩
  cplx product(const CMat& A, const CMat& B) const {
    switch (kind_) {
      case Kind::Pure: return (A.adjoint() * v_).dot(B * v_);
      case Kind::Diagonal: {
        cplx s = 0.0;
        for (int i = 0; i < p_.size(); ++i)
          if (p_(i) != 0.0) s += p_(i) * A.row(i).transpose().cwiseProduct(B.col(i)).sum();
        return s;
      }
      default: return ((r_ * A).array() * B.transpose().array()).sum();
    }
  }

  // ⟨ABC⟩
  cplx triple(const CMat& A, const CMat& B, const CMat& C) const {
    if (kind_ == Kind::Pure) return (A.adjoint() * v_).dot(B * (C * v_));
    return product(A * B, C);
  }

 private:
  enum class Kind { Pure, Diagonal, General };
  Kind kind_;
  CVec v_;
  RVec p_;
  CMat r_;
};

CMat identity_free(MatrixCache& cache, const OpPoly& p) { return cache.matrix_without_scalar(p); }

bool has_words(const OpPoly& p) {
  for (const auto& t : p.terms())
    if (!t.word.empty()) return true;
  return false;
}

CMat dissipator(const std::vector<CMat>& c, const CMat& rho) {
  CMat out = CMat::Zero(rho.rows(), rho.cols());
  for (const auto& op : c) {
    CMat cd = op.adjoint();
    CMat cdc = cd * op;
    out += op * rho * cd - 0.5 * (cdc * rho + rho * cdc);
  }
  return out;
}

CMat moving_frame_drho(const CMat& rho, const CMat& dK, const std::vector<CMat>& c, double dt) {
  CMat mdk = -I * dK;
  CMat r = mdk * rho;
  return r + r.adjoint() + dissipator(c, rho) * dt;
}

}  // namespace

void ModelSpec::validate() const {
  if (dims.empty()) throw InvalidDimension("model has no subsystems");
  CMat h = H.matrix(dims);
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("Hamiltonian is not Hermitian");
  const int nsub = static_cast<int>(dims.size());
  for (const auto& ch : observed)
    if (ch.op.max_sub() >= nsub) throw DimensionMismatch("channel refers to a missing subsystem");
  for (const auto& c : unobserved)
    if (c.max_sub() >= nsub) throw DimensionMismatch("channel refers to a missing subsystem");
}

double ModelSpec::max_decay_rate() const {
  double r = 0.0;
  auto scan = [&](const OpPoly& p) {
    for (const auto& t : p.terms())
      if (!t.word.empty()) r = std::max(r, std::norm(t.coeff));
  };
  for (const auto& ch : observed) scan(ch.op);
  for (const auto& c : unobserved) scan(c);
  return r;
}

std::vector<Unraveling> ModelSpec::unravelings() const {
  std::vector<Unraveling> out;
  for (const auto& ch : observed) out.push_back(ch.unraveling);
  return out;
}

std::vector<cplx> wiener(NoisePath& noise, const std::vector<Unraveling>& kinds, double dt) {
  if (!(dt > 0)) throw InvalidArgument("dt must be positive");
  std::vector<cplx> out;
  out.reserve(kinds.size());
  for (auto k : kinds) {
    if (k == Unraveling::Heterodyne) {
      double x = noise.normal();
      double y = noise.normal();
      out.emplace_back(x * std::sqrt(dt / 2), y * std::sqrt(dt / 2));
    } else {
      out.emplace_back(noise.normal() * std::sqrt(dt), 0.0);
    }
  }
  return out;
}

FrameOperators frame_operators(const ModelSpec& model, const ManifoldSpec& spec, const RVec& theta,
                               MatrixCache& cache) {
  auto transform = [&](const OpPoly& p) { return spec.empty() ? p : adjoint_action(spec, theta, p); };
  FrameOperators fo;
  fo.theta = theta;
  fo.H = identity_free(cache, transform(model.H));
  for (const auto& ch : model.observed) {
    OpPoly l = transform(ch.op);
    fo.L.push_back(identity_free(cache, l));
    fo.L0.push_back(l.scalar_part());
    OpPoly drift = l.adjoint() * l;
    if (ch.unraveling == Unraveling::Homodyne) drift += l * l;
    fo.drift.push_back(identity_free(cache, drift));
  }
  for (const auto& c : model.unobserved) fo.c.push_back(cache.matrix(transform(c)));
  if (!spec.empty()) {
    for (const auto& f : right_generator_polys(spec, theta)) fo.F.push_back(identity_free(cache, f));
    auto d = generator_derivative_polys(spec, theta);
    fo.dF.resize(d.size());
    for (size_t j = 0; j < d.size(); ++j)
      for (const auto& p : d[j]) fo.dF[j].push_back(has_words(p) ? identity_free(cache, p) : CMat());
  }
  return fo;
}

CMat sse_generator(const FrameOperators& fo, const ModelSpec& model, const QuantumState& sigma,
                   const std::vector<cplx>& dW, double dt) {
  if (dW.size() != model.observed.size()) throw DimensionMismatch("one noise increment per observed channel");
  Averager avg(sigma);
  CMat dG = fo.H * dt;
  for (size_t k = 0; k < fo.L.size(); ++k) {
    dG -= (0.5 * I * dt) * fo.drift[k];
    cplx meanL = avg(fo.L[k]) + fo.L0[k];
    if (model.observed[k].unraveling == Unraveling::Heterodyne) {
      cplx dM = meanL * dt + dW[k];
      dG += (I * std::conj(dM)) * fo.L[k];
    } else {
      double dM = 2.0 * meanL.real() * dt + dW[k].real();
      dG += (I * dM) * fo.L[k];
    }
  }
  return dG;
}

CMat sse_generator(const ModelSpec& model, const QuantumState& psi, const std::vector<cplx>& dW, double dt) {
  if (dW.size() != model.observed.size()) throw DimensionMismatch("one noise increment per observed channel");
  MatrixCache cache(model.dims);
  Averager avg(psi);
  CMat dG = cache.matrix(model.H) * dt;
  for (size_t k = 0; k < model.observed.size(); ++k) {
    const OpPoly& l = model.observed[k].op;
    OpPoly drift = l.adjoint() * l;
    const bool het = model.observed[k].unraveling == Unraveling::Heterodyne;
    if (!het) drift += l * l;
    dG -= (0.5 * I * dt) * cache.matrix(drift);
    CMat L = cache.matrix(l);
    cplx meanL = avg(L);
    if (het)
      dG += (I * std::conj(meanL * dt + dW[k])) * L;
    else
      dG += (I * (2.0 * meanL.real() * dt + dW[k].real())) * L;
  }
  return dG;
}

CMat moving_generator(const CMat& dG_theta, const std::vector<CMat>& F, const RVec& dtheta) {
  if (static_cast<Eigen::Index>(F.size()) != dtheta.size()) throw DimensionMismatch("one dθ per generator");
  CMat dK = dG_theta;
  for (size_t j = 0; j < F.size(); ++j) dK -= dtheta(j) * F[j];
  return dK;
}

RVec bias_flow(const QuantumState& state, const CMat& dG, const std::vector<CMat>& X, const std::vector<CMat>& c,
               double dt) {
  Averager avg(state);
  const cplx meanG = avg(dG);
  RVec dq(X.size());
  for (size_t j = 0; j < X.size(); ++j) {
    cplx corr = avg.product(dG.adjoint(), X[j]) - std::conj(meanG) * avg(X[j]);
    double v = 2.0 * corr.imag();
    for (const auto& op : c) {
      CMat cd = op.adjoint();
      cplx t = avg.triple(cd, X[j], op) - avg.triple(X[j], cd, op);
      v -= t.real() * dt;
    }
    dq(j) = v;
  }
  return dq;
}

CoordinateIncrement coordinate_increment(const RMat& h, const RVec& y, const RVec& dq, double eta, double dt) {
  const int n = static_cast<int>(h.rows());
  CoordinateIncrement ci;
  ci.dtheta = RVec::Zero(n);
  if (n == 0) return ci;
  Eigen::SelfAdjointEigenSolver<RMat> es(h);
  if (es.eigenvalues().minCoeff() < 1e-8) {
    ci.frozen = true;
    return ci;
  }
  RMat reg = h + 1e-10 * RMat::Identity(n, n);
  ci.dtheta = reg.ldlt().solve(dq - eta * dt * y);
  return ci;
}

CoordinateIncrement gibbs_projection_increment(const RMat& h, const RMat& y_kj, const RMat& g, const RVec& dq,
                                               const RVec& dm) {
  const int n = static_cast<int>(h.rows());
  const int e = static_cast<int>(g.rows());
  RMat A(n + e, n + e);
  A << h, y_kj.transpose(), y_kj, g;
  RVec b(n + e);
  b << dq, dm;
  Eigen::JacobiSVD<RMat> svd(A);
  const RVec& sv = svd.singularValues();
  double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : kInf;
  if (!(cond < 1e12)) throw ProjectionSingular("Gibbs projection system is singular", cond);
  RVec x = A.fullPivLu().solve(b);
  CoordinateIncrement ci;
  ci.dtheta = x.head(n);
  ci.dbeta = x.tail(e);
  return ci;
}

Integrator::Integrator(ModelSpec model, ManifoldSpec spec, DynamicsOptions opts)
    : model_(std::move(model)), spec_(std::move(spec)), opts_(std::move(opts)), cache_(model_.dims) {
  model_.validate();
  spec_.check_dims(model_.dims);
  opts_.functional.validate();
  eta_ = opts_.eta >= 0 ? opts_.eta : 10.0 * model_.max_decay_rate();
  m_ = penalty_diagonal(opts_.functional, model_.dims);
  if (opts_.functional.kind == FunctionalKind::CGF) m_ = (opts_.functional.lambda * m_.array()).exp();
  if (spec_.empty() && opts_.mode != CoordinateMode::FixedBasis)
    throw InvalidArgument("coordinate dynamics need a manifold; use the fixed basis mode");
}

const FrameOperators& Integrator::frame(const RVec& theta) {
  if (!last_ || last_->theta.size() != theta.size() || last_->theta != theta)
    last_ = frame_operators(model_, spec_, theta, cache_);
  return *last_;
}

QuantumState Integrator::reference_state(const RVec& beta) const {
  const auto& terms = opts_.functional.terms;
  RVec b = beta.size() == 0 ? RVec::Constant(terms.size(), kInf) : beta;
  RVec p = gibbs_populations(terms, b, model_.dims, false);
  return QuantumState::mixed(p.cast<cplx>().asDiagonal(), model_.dims);
}

cplx Integrator::fixed_frame_expect(const OpPoly& op, const CoupledState& s) {
  OpPoly t = spec_.empty() ? op : adjoint_action(spec_, s.theta, op);
  return s.sigma.expect(cache_.matrix(t));
}

Increment Integrator::increment(const CoupledState& s, const std::vector<cplx>& dW, double dt) {
  const FrameOperators& fo = frame(s.theta);
  const int n = spec_.n_coords();
  Increment inc;
  inc.dtheta = RVec::Zero(n);
  inc.dbeta = RVec::Zero(s.beta.size());
  if (!s.sigma.is_pure() || !model_.unobserved.empty()) {
    if (s.sigma.is_pure()) throw InvalidArgument("unobserved channels need a mixed state");
  }
  inc.dG = sse_generator(fo, model_, s.sigma, dW, dt);

  auto sensitivity = [&](const QuantumState& at, RVec& y, RMat& h, std::vector<CMat>& Y) {
    Averager avg(at);
    std::vector<CMat> Z(n);
    Y.resize(n);
    y.resize(n);
    h.resize(n, n);
    for (int j = 0; j < n; ++j) {
      Z[j] = diag_commutator(m_, fo.F[j]);
      Y[j] = I * Z[j];
      y(j) = avg(Y[j]).real();
    }
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        auto entry = [&](int a, int b) {
          double v = (avg.product(fo.F[a], Z[b]) - avg.product(Z[b], fo.F[a])).real();
          if (fo.dF[a][b].rows() > 0) v += (I * avg(diag_commutator(m_, fo.dF[a][b]))).real();
          return v;
        };
        h(j, k) = h(k, j) = 0.5 * (entry(j, k) + entry(k, j));
      }
  };

  switch (opts_.mode) {
    case CoordinateMode::FixedBasis:
      break;
    case CoordinateMode::GradientFlow: {
      std::vector<CMat> Y;
      sensitivity(s.sigma, inc.y, inc.h, Y);
      inc.dq = bias_flow(s.sigma, inc.dG, Y, fo.c, dt);
      CoordinateIncrement ci = coordinate_increment(inc.h, inc.y, inc.dq, eta_, dt);
      inc.dtheta = ci.dtheta;
      inc.frozen = ci.frozen;
      break;
    }
    case CoordinateMode::Fiducial: {
      QuantumState omega = reference_state(opts_.reference_beta);
      std::vector<CMat> Y;
      RVec y_omega;
      sensitivity(omega, y_omega, inc.h, Y);
      Averager avg(s.sigma);
      inc.y.resize(n);
      for (int j = 0; j < n; ++j) inc.y(j) = avg(Y[j]).real();
      CMat dG_omega = sse_generator(fo, model_, omega, dW, dt);
      inc.dq = bias_flow(omega, dG_omega, Y, fo.c, dt);
      CoordinateIncrement ci = coordinate_increment(inc.h, inc.y, inc.dq, eta_, dt);
      inc.dtheta = ci.dtheta;
      inc.frozen = ci.frozen;
      break;
    }
    case CoordinateMode::GibbsProjection: {
      const auto& terms = opts_.functional.terms;
      if (s.beta.size() != static_cast<Eigen::Index>(terms.size()))
        throw InvalidArgument("Gibbs projection needs one weight per penalty");
      QuantumState chi = reference_state(s.beta);
      const int e = static_cast<int>(terms.size());
      RMat y_kj(e, n), h = RMat::Zero(n, n), g(e, e);
      std::vector<RVec> diags;
      for (const auto& t : terms) diags.push_back(penalty_diagonal(std::vector<PenaltyTerm>{t}, model_.dims));
      RVec p = chi.rho().diagonal().real();
      std::vector<CMat> Mk;
      for (int k = 0; k < e; ++k) {
        GradientHessianOps ops = gradient_hessian_ops(diags[k], fo.F, fo.dF);
        Averager avg(chi);
        for (int j = 0; j < n; ++j) y_kj(k, j) = avg(ops.Y[j]).real();
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) h(j, l) += s.beta(k) * 0.5 * (avg(ops.H[j][l]) + avg(ops.H[l][j])).real();
        Mk.push_back(diags[k].cast<cplx>().asDiagonal());
      }
      for (int k = 0; k < e; ++k)
        for (int m = 0; m < e; ++m) {
          double a = p.dot(diags[k]), b = p.dot(diags[m]);
          g(k, m) = p.dot(((diags[k].array() - a) * (diags[m].array() - b)).matrix());
        }
      std::vector<CMat> Y;
      RVec ydummy;
      RMat hdummy;
      sensitivity(chi, ydummy, hdummy, Y);
      CMat dG_chi = sse_generator(fo, model_, chi, dW, dt);
      inc.dq = bias_flow(chi, dG_chi, Y, fo.c, dt);
      RVec dm = bias_flow(chi, dG_chi, Mk, fo.c, dt);
      CoordinateIncrement ci = gibbs_projection_increment(h, y_kj, g, inc.dq, dm);
      inc.dtheta = ci.dtheta;
      inc.dbeta = ci.dbeta;
      inc.h = h;
      inc.y = y_kj.transpose() * s.beta;
      break;
    }
  }

  inc.dK = n > 0 ? moving_generator(inc.dG, fo.F, inc.dtheta) : inc.dG;
  if (opts_.mode == CoordinateMode::GibbsProjection) return inc;
  if (s.sigma.is_pure())
    inc.dvec = -I * (inc.dK * s.sigma.vec());
  else
    inc.drho = moving_frame_drho(s.sigma.rho(), inc.dK, fo.c, dt);
  return inc;
}

CoupledState Integrator::step(const CoupledState& s, const std::vector<cplx>& dW, double dt) {
  if (!(dt > 0)) throw InvalidArgument("dt must be positive");
  const bool gibbs = opts_.mode == CoordinateMode::GibbsProjection;
  Increment a = increment(s, dW, dt);
  CoupledState pred = s;
  pred.theta = s.theta + a.dtheta;
  if (gibbs) {
    pred.beta = s.beta + a.dbeta;
    pred.sigma = reference_state(pred.beta);
  } else if (s.sigma.is_pure()) {
    pred.sigma = QuantumState::pure(s.sigma.vec() + a.dvec, s.sigma.dims());
  } else {
    pred.sigma = QuantumState::mixed(s.sigma.rho() + a.drho, s.sigma.dims());
  }
  Increment b = increment(pred, dW, dt);
  if (a.frozen || b.frozen) ++frozen_steps_;

  CoupledState out = s;
  out.t = s.t + dt;
  out.theta = s.theta + 0.5 * (a.dtheta + b.dtheta);
  out.beta = gibbs ? RVec(s.beta + 0.5 * (a.dbeta + b.dbeta)) : s.beta;
  if (!out.theta.allFinite()) throw InstabilityError("non-finite coordinates at t = " + std::to_string(out.t));
  if (gibbs) {
    for (int k = 0; k < out.beta.size(); ++k)
      if (!(out.beta(k) > 0)) throw InstabilityError("Gibbs weight left the positive range at t = " + std::to_string(out.t));
    out.sigma = reference_state(out.beta);
    return out;
  }
  double w0 = s.sigma.weight();
  if (s.sigma.is_pure())
    out.sigma = QuantumState::pure(s.sigma.vec() + 0.5 * (a.dvec + b.dvec), s.sigma.dims());
  else
    out.sigma = QuantumState::mixed(s.sigma.rho() + 0.5 * (a.drho + b.drho), s.sigma.dims());
  double defect = std::abs(out.sigma.weight() / w0 - 1.0);
  out.norm_defect = defect;
  if (!(defect <= 0.5)) throw InstabilityError("norm defect " + std::to_string(defect) + " at t = " + std::to_string(out.t));
  out.sigma = out.sigma.normalized();
  return out;
}

CoupledState Integrator::step(const CoupledState& s, NoisePath& noise, double dt) {
  return step(s, wiener(noise, model_.unravelings(), dt), dt);
}

CoupledState Integrator::step(const CoupledState& s, double dt) {
  return step(s, std::vector<cplx>(model_.observed.size(), 0.0), dt);
}

QuantumState master_step(const QuantumState& sigma, const ModelSpec& model, const ManifoldSpec& spec,
                         const RVec& theta, const RVec& dtheta, double dt, const std::vector<cplx>& dW,
                         bool check_positivity) {
  if (sigma.is_pure()) throw InvalidArgument("master_step needs a mixed state");
  MatrixCache cache(model.dims);
  FrameOperators fo = frame_operators(model, spec, theta, cache);
  auto generator = [&](const CMat& rho) {
    QuantumState st = QuantumState::mixed(rho, sigma.dims());
    CMat dG = sse_generator(fo, model, st, dW, dt);
    return spec.empty() ? dG : moving_generator(dG, fo.F, dtheta);
  };
  const CMat& r0 = sigma.rho();
  // Strang splitting: the Hermitian part of dK at the initial state is applied
  // exactly in two half steps, the remainder with Heun.
  CMat dK0 = generator(r0);
  CMat herm = 0.5 * (dK0 + dK0.adjoint());
  CMat half = expm_hermitian(herm, 0.5);
  auto rest = [&](const CMat& rho) {
    CMat d = moving_frame_drho(rho, generator(rho), fo.c, dt);
    return CMat(d + I * (herm * rho - rho * herm));
  };
  CMat ra = half * r0 * half.adjoint();
  CMat k1 = rest(ra);
  CMat k2 = rest(ra + k1);
  CMat rb = ra + 0.5 * (k1 + k2);
  CMat r1 = half * rb * half.adjoint();
  r1 = 0.5 * (r1 + r1.adjoint());
  if (check_positivity) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (r1 + r1.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * r1.trace().real())
      throw StepSizeError("master step produced a negative eigenvalue; reduce dt");
  }
  QuantumState out = QuantumState::mixed(r1, sigma.dims());
  return model.observed.empty() ? out : out.normalized();
}

double estimate_eta(const ModelSpec& model, const ManifoldSpec& spec, const PenaltyFunctional& functional,
                    const RVec& theta, double h) {
  DynamicsOptions opts;
  opts.mode = CoordinateMode::Fiducial;
  opts.eta = 0.0;
  opts.functional = functional;
  Integrator integ(model, spec, opts);
  const int n = spec.n_coords();
  QuantumState ground = integ.reference_state(RVec());
  std::vector<cplx> zero(model.observed.size(), 0.0);
  auto drift = [&](const RVec& th) {
    CoupledState s{ground, th, RVec(), 0.0};
    return integ.increment(s, zero, 1.0).dtheta;
  };
  RMat J(n, n);
  for (int k = 0; k < n; ++k) {
    RVec e = RVec::Zero(n);
    e(k) = h;
    J.col(k) = (drift(theta + e) - drift(theta - e)) / (2 * h);
  }
  Eigen::EigenSolver<RMat> es(J);
  double lo = kInf;
  for (int i = 0; i < n; ++i) lo = std::min(lo, -es.eigenvalues()(i).real());
  return lo;
}

}  // namespace qmb
