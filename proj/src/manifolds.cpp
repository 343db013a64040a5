#include "qmb/manifolds.hpp"

#include <cmath>
#include <set>

namespace qmb {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

cplx spin_mu(const RVec& theta, int offset) { return {theta(offset), theta(offset + 1)}; }

std::vector<CMat> local_unitaries(const ManifoldSpec& spec, const RVec& theta, const Dims& dims) {
  std::vector<CMat> out;
  int off = 0;
  for (const auto& f : spec.factors()) {
    const int d = dims[f.sub];
    const double t1 = theta(off), t2 = theta(off + 1);
    CMat u;
    switch (f.kind) {
      case FactorKind::CoherentDisplacement: {
        CMat gen = t1 * momentum(d).mat() - t2 * position(d).mat();
        u = expm_hermitian(gen, 1.0);
        break;
      }
      case FactorKind::DisplacedSqueezed:
        u = expm_hermitian(momentum(d).mat(), t1) * expm_hermitian(squeeze_generator(d).mat(), -t2);
        break;
      case FactorKind::SpinCoherent: {
        AngularMomentum j = angular_momentum(spin_from_dim(d));
        cplx mu(t1, t2);
        double n2 = 1.0 + std::norm(mu);
        u = expm_general(mu * j.jplus.mat()) * expm_general(std::log(n2) * j.jz.mat()) *
            expm_general(-std::conj(mu) * j.jminus.mat());
        break;
      }
    }
    out.push_back(std::move(u));
    off += 2;
  }
  return out;
}

}  // namespace

ManifoldSpec ManifoldSpec::coherent_displacement(int sub) {
  ManifoldSpec s;
  s.factors_.push_back({FactorKind::CoherentDisplacement, sub});
  return s;
}

ManifoldSpec ManifoldSpec::displaced_squeezed(int sub) {
  ManifoldSpec s;
  s.factors_.push_back({FactorKind::DisplacedSqueezed, sub});
  return s;
}

ManifoldSpec ManifoldSpec::spin_coherent(int sub) {
  ManifoldSpec s;
  s.factors_.push_back({FactorKind::SpinCoherent, sub});
  return s;
}

ManifoldSpec ManifoldSpec::product(const std::vector<ManifoldSpec>& parts) {
  ManifoldSpec s;
  std::set<int> used;
  for (const auto& p : parts)
    for (const auto& f : p.factors_) {
      if (!used.insert(f.sub).second) throw InvalidArgument("product factors must act on disjoint subsystems");
      s.factors_.push_back(f);
    }
  return s;
}

int ManifoldSpec::factor_on(int sub) const {
  for (size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].sub == sub) return static_cast<int>(i);
  return -1;
}

void ManifoldSpec::check_dims(const Dims& dims) const {
  for (const auto& f : factors_) {
    if (f.sub < 0 || f.sub >= static_cast<int>(dims.size()))
      throw DimensionMismatch("manifold factor refers to a missing subsystem");
    if (f.kind != FactorKind::SpinCoherent && dims[f.sub] < 2) throw InvalidDimension("bosonic mode needs dim ≥ 2");
  }
}

void ManifoldSpec::check_point(const RVec& theta) const {
  if (theta.size() != n_coords()) throw InvalidArgument("coordinate length does not match manifold");
  if (!theta.allFinite()) throw InvalidArgument("non-finite coordinates");
}

std::vector<OpPoly> right_generator_polys(const ManifoldSpec& spec, const RVec& theta) {
  spec.check_point(theta);
  using namespace ops;
  std::vector<OpPoly> out;
  int off = 0;
  for (const auto& f : spec.factors()) {
    const int s = f.sub;
    const double t1 = theta(off), t2 = theta(off + 1);
    switch (f.kind) {
      case FactorKind::CoherentDisplacement:
        out.push_back(p(s) + OpPoly::scalar(t2 / 2));
        out.push_back(-q(s) - OpPoly::scalar(t1 / 2));
        break;
      case FactorKind::DisplacedSqueezed:
        out.push_back(std::exp(t2) * p(s));
        out.push_back(-ops::s(s));
        break;
      case FactorKind::SpinCoherent: {
        double n2 = 1.0 + t1 * t1 + t2 * t2;
        OpPoly g1 = -I * jm(s) + I * jp(s) - 2.0 * t2 * jz(s);
        OpPoly g2 = -jm(s) - jp(s) + 2.0 * t1 * jz(s);
        out.push_back(g1 * cplx(1.0 / n2));
        out.push_back(g2 * cplx(1.0 / n2));
        break;
      }
    }
    off += 2;
  }
  return out;
}

std::vector<CMat> right_generators(const ManifoldSpec& spec, const RVec& theta, const Dims& dims) {
  spec.check_dims(dims);
  std::vector<CMat> out;
  for (const auto& p : right_generator_polys(spec, theta)) out.push_back(p.matrix(dims));
  return out;
}

std::vector<std::vector<OpPoly>> generator_derivative_polys(const ManifoldSpec& spec, const RVec& theta) {
  spec.check_point(theta);
  using namespace ops;
  const int n = spec.n_coords();
  std::vector<std::vector<OpPoly>> d(n, std::vector<OpPoly>(n));
  int off = 0;
  for (const auto& f : spec.factors()) {
    const int s = f.sub;
    const double t1 = theta(off), t2 = theta(off + 1);
    const int j1 = off, j2 = off + 1;
    switch (f.kind) {
      case FactorKind::CoherentDisplacement:
        d[j2][j1] = OpPoly::scalar(0.5);
        d[j1][j2] = OpPoly::scalar(-0.5);
        break;
      case FactorKind::DisplacedSqueezed:
        d[j2][j1] = std::exp(t2) * p(s);
        break;
      case FactorKind::SpinCoherent: {
        double n2 = 1.0 + t1 * t1 + t2 * t2;
        OpPoly g1 = -I * jm(s) + I * jp(s) - 2.0 * t2 * jz(s);
        OpPoly g2 = -jm(s) - jp(s) + 2.0 * t1 * jz(s);
        double inv = 1.0 / n2, inv2 = inv * inv;
        d[j1][j1] = g1 * cplx(-2.0 * t1 * inv2);
        d[j2][j1] = jz(s) * cplx(-2.0 * inv) + g1 * cplx(-2.0 * t2 * inv2);
        d[j1][j2] = jz(s) * cplx(2.0 * inv) + g2 * cplx(-2.0 * t1 * inv2);
        d[j2][j2] = g2 * cplx(-2.0 * t2 * inv2);
        break;
      }
    }
    off += 2;
  }
  return d;
}

OpPoly adjoint_image(const ManifoldSpec& spec, const RVec& theta, const Letter& l) {
  spec.check_point(theta);
  const int fi = spec.factor_on(l.sub);
  OpPoly self = OpPoly::letter(l.sub, l.gen);
  if (fi < 0) return self;
  const ManifoldFactor& f = spec.factors()[fi];
  const double t1 = theta(2 * fi), t2 = theta(2 * fi + 1);
  const bool spin_letter = l.gen == Gen::Jz || l.gen == Gen::Jp || l.gen == Gen::Jm;
  if ((f.kind == FactorKind::SpinCoherent) != spin_letter)
    throw UnsupportedOperator("operator letter does not belong to the manifold's generating set");
  using namespace ops;
  const int s = l.sub;
  switch (f.kind) {
    case FactorKind::CoherentDisplacement: {
      cplx alpha = cplx(t1, t2) / kSqrt2;
      return l.gen == Gen::A ? self + OpPoly::scalar(alpha) : self + OpPoly::scalar(std::conj(alpha));
    }
    case FactorKind::DisplacedSqueezed: {
      OpPoly other = l.gen == Gen::A ? ad(s) : a(s);
      return OpPoly::scalar(t1 / kSqrt2) + std::cosh(t2) * self - std::sinh(t2) * other;
    }
    case FactorKind::SpinCoherent: {
      cplx mu = spin_mu(theta, 2 * fi);
      cplx inv = 1.0 / (1.0 + std::norm(mu));
      if (l.gen == Gen::Jm) return (jm(s) - mu * mu * jp(s) - 2.0 * mu * jz(s)) * inv;
      if (l.gen == Gen::Jp) {
        cplx mc = std::conj(mu);
        return (jp(s) - mc * mc * jm(s) - 2.0 * mc * jz(s)) * inv;
      }
      return (std::conj(mu) * jm(s) + mu * jp(s) + (1.0 - std::norm(mu)) * jz(s)) * inv;
    }
  }
  return self;
}

OpPoly adjoint_action(const ManifoldSpec& spec, const RVec& theta, const OpPoly& op) {
  return op.substitute([&](const Letter& l) { return adjoint_image(spec, theta, l); });
}

CMat unitary(const ManifoldSpec& spec, const RVec& theta, const Dims& dims) {
  spec.check_dims(dims);
  spec.check_point(theta);
  const int n = total_dim(dims);
  CMat U = CMat::Identity(n, n);
  auto locals = local_unitaries(spec, theta, dims);
  for (size_t i = 0; i < locals.size(); ++i) U = U * embed(locals[i], dims, spec.factors()[i].sub);
  return U;
}

double edge_population(const QuantumState& state, const std::vector<int>& subs, int levels) {
  double w = 0.0;
  for (int s : subs) {
    RVec p = occupation_probabilities(state, s);
    for (int k = std::max(0, static_cast<int>(p.size()) - levels); k < p.size(); ++k) w += p(k);
  }
  return w;
}

ApplyResult apply(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state, Direction dir,
                  const ApplyOptions& opts) {
  const Dims& dims = state.dims();
  CMat U = unitary(spec, theta, dims);
  if (dir == Direction::Inverse) U.adjointInPlace();
  QuantumState out = state.is_pure() ? QuantumState::pure(U * state.vec(), dims)
                                     : QuantumState::mixed(U * state.rho() * U.adjoint(), dims);
  std::vector<int> bosonic;
  for (const auto& f : spec.factors())
    if (f.kind != FactorKind::SpinCoherent) bosonic.push_back(f.sub);
  double edge = bosonic.empty() ? 0.0 : edge_population(out, bosonic);
  if (opts.check_leakage && edge > opts.leakage_threshold)
    throw TruncationWarning("transformed state leaks into the truncation edge (weight " + std::to_string(edge) + ")");
  if (opts.renormalize) out = out.normalized();
  return {std::move(out), edge};
}

QuantumState to_moving_frame(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state) {
  ApplyOptions o;
  o.check_leakage = false;
  return apply(spec, theta, state, Direction::Inverse, o).state;
}

QuantumState to_fixed_frame(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state) {
  ApplyOptions o;
  o.check_leakage = false;
  return apply(spec, theta, state, Direction::Forward, o).state;
}

}  // namespace qmb
