#pragma once

#include <vector>

#include "qmb/complexity.hpp"

namespace qmb {

class InsufficientDimension : public Error {
 public:
  using Error::Error;
};
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

// χ_{θ,β} = U_θ e^{−Σ β_k M_k} U_θ† / Z(β). Infinite β_k projects onto the
// ground space of M_k.
struct GibbsSpec {
  std::vector<PenaltyTerm> penalties;
  RVec beta;
  ManifoldSpec spec;
  RVec theta;  // empty means the identity point
};

// Diagonal of the untransformed Gibbs state.
RVec gibbs_populations(const std::vector<PenaltyTerm>& penalties, const RVec& beta, const Dims& dims,
                       bool check_tail = true);
QuantumState gibbs_state(const GibbsSpec& g, const Dims& dims, bool check_tail = true);
double log_partition(const std::vector<PenaltyTerm>& penalties, const RVec& beta, const Dims& dims);

// −H(ρ) + ln Z(β) + Σ_k β_k ⟨M_{k,θ}⟩_ρ
double relative_entropy(const QuantumState& rho, const GibbsSpec& g);
// Tr ρ(ln ρ − ln χ) from the spectra, used as a cross-check.
double relative_entropy_direct(const QuantumState& rho, const QuantumState& chi);

struct BetaFit {
  RVec beta;  // +∞ entries carry the zero-temperature flag
  std::vector<bool> zero_temperature;
  bool experimental = false;  // set when penalties share a subsystem
};

BetaFit fit_beta(const QuantumState& rho, const std::vector<PenaltyTerm>& penalties, const ManifoldSpec& spec,
                 const RVec& theta);

struct QuadraticExpansion {
  RVec z;     // ⟨M_k⟩_σ − ⟨M_k⟩_χ
  RMat y_kj;  // ⟨i[M_k, F_j]⟩_σ
  RVec y;     // Σ_k β_k y_kj
  RMat h;     // Σ_k β_k ⟨H_k,jl⟩_σ
  RMat g;     // Cov_χ(M_k, M_m)
};

QuadraticExpansion quadratic_expansion(const QuantumState& rho, const GibbsSpec& g);

}  // namespace qmb
