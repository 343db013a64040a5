#include "qmb/models.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace qmb {

ModelSpec empty_cavity(const CavityParams& p, int dim, Unraveling unraveling) {
  if (dim < 4) throw InvalidDimension("cavity dimension must be at least 4");
  if (p.kappa < 0 || p.n_th < 0) throw InvalidArgument("κ and n_th must be non-negative");
  using namespace ops;
  const double rk = std::sqrt(p.kappa);
  ModelSpec m;
  m.dims = {dim};
  m.H = p.omega * n() + (rk / (2.0 * I)) * (p.epsilon * ad() - std::conj(p.epsilon) * a());
  m.observed.push_back({rk * a() + OpPoly::scalar(p.epsilon), unraveling});
  return m;
}

cplx cavity_steady_amplitude(const CavityParams& p) {
  cplx rate(p.kappa / 2, p.omega);
  if (std::abs(rate) == 0.0) {
    if (std::abs(p.epsilon) == 0.0) return 0.0;
    throw InvalidArgument("driven cavity without damping or detuning has no steady state");
  }
  return -std::sqrt(p.kappa) * p.epsilon / rate;
}

cplx cavity_amplitude(const CavityParams& p, cplx alpha0, double t) {
  cplx rate(p.kappa / 2, p.omega);
  if (std::abs(rate) == 0.0) return alpha0 - std::sqrt(p.kappa) * p.epsilon * t;
  cplx ss = cavity_steady_amplitude(p);
  return ss + (alpha0 - ss) * std::exp(-rate * t);
}

double occupation_to_beta(double n_th) {
  if (n_th < 0) throw InvalidArgument("occupation must be non-negative");
  if (n_th == 0) return std::numeric_limits<double>::infinity();
  return std::log1p(1.0 / n_th);
}

ModelSpec dpo(const DpoParams& p, int dim, Unraveling linear, Unraveling two_photon) {
  if (p.kappa < 0 || p.beta2 < 0) throw InvalidArgument("loss rates must be non-negative");
  if (dim < dpo_min_dim(p)) throw InvalidDimension("dimension too small for the steady amplitude");
  using namespace ops;
  ModelSpec m;
  m.dims = {dim};
  m.H = (I * p.chi / 2.0) * (ad().pow(2) - a().pow(2));
  if (p.kappa > 0) m.observed.push_back({std::sqrt(p.kappa) * a(), linear});
  if (p.beta2 > 0) m.observed.push_back({std::sqrt(p.beta2) * a().pow(2), two_photon});
  return m;
}

cplx dpo_drift(const DpoParams& p, cplx alpha) {
  return -(p.kappa / 2 + p.beta2 * std::norm(alpha)) * alpha + p.chi * std::conj(alpha);
}

double dpo_threshold(const DpoParams& p) { return p.kappa / 2; }

std::vector<double> dpo_fixed_points(const DpoParams& p) {
  if (p.chi <= dpo_threshold(p)) return {0.0};
  if (p.beta2 <= 0) throw InvalidArgument("above threshold without two-photon loss there is no fixed point");
  double r = std::sqrt((p.chi - p.kappa / 2) / p.beta2);
  return {-r, 0.0, r};
}

int dpo_min_dim(const DpoParams& p) {
  double r2 = 0.0;
  if (p.chi > dpo_threshold(p) && p.beta2 > 0) r2 = (p.chi - p.kappa / 2) / p.beta2;
  return std::max(4, static_cast<int>(std::ceil(r2 + 4 * std::sqrt(r2))));
}

KerrNetwork kerr_network(int modes, const std::vector<HamiltonianTerm>& hamiltonian,
                         const std::vector<LossTerm>& losses, int dim_per_mode) {
  if (modes < 1) throw ConfigError("network needs at least one mode");
  if (dim_per_mode < 2) throw InvalidDimension("mode dimension must be at least 2");
  using namespace ops;
  auto check_mode = [&](int j, const char* what) {
    if (j < 0 || j >= modes) throw ConfigError(std::string(what) + " refers to mode " + std::to_string(j));
  };
  KerrNetwork out;
  out.model.dims.assign(modes, dim_per_mode);
  for (const auto& t : hamiltonian) {
    check_mode(t.mode, "Hamiltonian term");
    switch (t.kind) {
      case TermKind::Kerr:
      case TermKind::Detuning:
        if (t.coeff.imag() != 0.0) throw ConfigError("Kerr and detuning coefficients must be real");
        if (t.kind == TermKind::Kerr)
          out.model.H += t.coeff * (ad(t.mode).pow(2) * a(t.mode).pow(2));
        else
          out.model.H += t.coeff * n(t.mode);
        break;
      case TermKind::Beamsplitter:
        check_mode(t.other, "beamsplitter");
        if (t.other == t.mode) throw ConfigError("beamsplitter needs two distinct modes");
        out.model.H += t.coeff * (ad(t.mode) * a(t.other)) + std::conj(t.coeff) * (ad(t.other) * a(t.mode));
        break;
      case TermKind::Drive:
        out.model.H += t.coeff * ad(t.mode) + std::conj(t.coeff) * a(t.mode);
        break;
    }
  }
  for (const auto& l : losses) {
    check_mode(l.mode, "loss term");
    if (l.rate < 0) throw ConfigError("loss rate must be non-negative");
    OpPoly op = std::sqrt(l.rate) * a(l.mode);
    if (l.observed)
      out.model.observed.push_back({op, l.unraveling});
    else
      out.model.unobserved.push_back(op);
  }
  std::vector<int> subs(modes);
  std::iota(subs.begin(), subs.end(), 0);
  out.counting = PenaltyFunctional::total_number(subs);
  for (int j = 0; j < modes; ++j) out.total_number += n(j);
  out.model.validate();
  return out;
}

}  // namespace qmb
