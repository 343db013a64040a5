#pragma once

#include <vector>

#include "qmb/dynamics.hpp"

namespace qmb {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CavityParams {
  double omega = 0.0;
  double kappa = 1.0;
  cplx epsilon = 0.0;
  double n_th = 0.0;  // occupation of the fiducial Gibbs state
};

// H = ω a†a + (√κ/2i)(ε a† − ε* a), observed L = √κ a + ε.
ModelSpec empty_cavity(const CavityParams& params, int dim, Unraveling unraveling = Unraveling::Heterodyne);
// Mean amplitude ⟨a⟩(t) = α_ss + (α₀ − α_ss) e^{−(iω+κ/2)t}.
cplx cavity_amplitude(const CavityParams& params, cplx alpha0, double t);
cplx cavity_steady_amplitude(const CavityParams& params);
// β of the number-state Gibbs family with ⟨N⟩ = n_th; +∞ for n_th = 0.
double occupation_to_beta(double n_th);

struct DpoParams {
  double kappa = 1.0;
  double beta2 = 1.0;
  double chi = 0.0;
};

// H = i(χ/2)(a†² − a²), L = (√κ a, √β₂ a²).
ModelSpec dpo(const DpoParams& params, int dim, Unraveling linear = Unraveling::Heterodyne,
              Unraveling two_photon = Unraveling::Heterodyne);
// Semi-classical drift −(κ/2 + β₂|α|²)α + χα*.
cplx dpo_drift(const DpoParams& params, cplx alpha);
double dpo_threshold(const DpoParams& params);
// Real fixed points; {0} at or below threshold, {0, ±α_ss} above.
std::vector<double> dpo_fixed_points(const DpoParams& params);
// Smallest dimension with |α_ss|² + 4|α_ss| ≤ dim (at least 4).
int dpo_min_dim(const DpoParams& params);

enum class TermKind { Kerr, Detuning, Beamsplitter, Drive };

// Kerr: χ a_j†² a_j². Detuning: Δ a_j†a_j. Beamsplitter: g a_j†a_k + h.c.
// Drive: ε a_j† + ε* a_j.
struct HamiltonianTerm {
  TermKind kind = TermKind::Detuning;
  int mode = 0;
  int other = -1;
  cplx coeff = 0.0;
};

// L = √rate a_j.
struct LossTerm {
  int mode = 0;
  double rate = 0.0;
  bool observed = true;
  Unraveling unraveling = Unraveling::Heterodyne;
};

struct KerrNetwork {
  ModelSpec model;
  PenaltyFunctional counting;  // Σ_j a_j†a_j
  OpPoly total_number;
};

KerrNetwork kerr_network(int modes, const std::vector<HamiltonianTerm>& hamiltonian,
                         const std::vector<LossTerm>& losses, int dim_per_mode);

}  // namespace qmb
