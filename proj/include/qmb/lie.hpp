#pragma once

#include <vector>

#include "qmb/hilbert.hpp"

namespace qmb {

// Finite-dimensional Lie algebra spanned by matrices {Y_1..Y_q} with
// [Y_j, Y_k] = Σ_l c_jk^l Y_l.
class LieAlgebra {
 public:
  // Structure constants are fitted on the interior subspace (top `exclude_top`
  // levels of every subsystem removed) and verified to 1e-10.
  LieAlgebra(std::vector<CMat> basis, Dims dims, int exclude_top = 2);

  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<CMat>& basis() const { return basis_; }
  const Dims& dims() const { return dims_; }
  cplx c(int j, int k, int l) const { return c_[j](k, l); }
  // (ad_j)_{kl} = c_jk^l
  const CMat& ad(int j) const { return c_[j]; }
  // Coefficients x with Σ_k x_k Y_k = op on the interior subspace.
  CVec coefficients(const CMat& op) const;
  CMat combine(const CVec& coeffs) const;

 private:
  std::vector<CMat> basis_;
  Dims dims_;
  int exclude_top_;
  std::vector<CMat> c_;
  CMat design_;  // interior-vectorized basis, one column per element
};

// U_η = V_1 ⋯ V_n with V_j = exp(−η^j X_j) and X_j = Σ_k R_jk Y_k.
struct ChainedTransform {
  const LieAlgebra* algebra = nullptr;
  CMat R;  // n × q
  int n() const { return static_cast<int>(R.rows()); }
  // Chain whose generators are X_j = i F_j for Hermitian F_j.
  static ChainedTransform from_hermitian(const LieAlgebra& algebra, const std::vector<CMat>& F);
};

// S^{(j)}_η = exp(A), A_kl = η Σ_h R_jh c_hk^l, so that V_j⁻¹ Y_k V_j = Σ_l S_kl Y_l.
CMat adjoint_single(const ChainedTransform& t, int j, double coordinate);
// Product S^{(1)}…S^{(n)}: U⁻¹ Y_k U = Σ_l S_kl Y_l.
CMat adjoint_chain(const ChainedTransform& t, const RVec& coordinates);
// F_j^> = i U† ∂U/∂θ^j assembled from the adjoint matrices to the right of j.
std::vector<CMat> right_generators_from_chain(const ChainedTransform& t, const RVec& coordinates);
CMat chain_unitary(const ChainedTransform& t, const RVec& coordinates);

// Adjoint element S with U Y_k U† = Σ_m S_km Y_m.
struct AdjointState {
  CMat S;
  static AdjointState identity(int q);
};
// First-order update S_k^m ← S_k^m − i Σ dμ^j c_jk^l S_l^m.
AdjointState adjoint_update(const AdjointState& s, const RVec& dmu, const LieAlgebra& algebra);
// Exact group step S ← exp(−i Σ dμ^j ad_j) S.
AdjointState adjoint_update_exact(const AdjointState& s, const RVec& dmu, const LieAlgebra& algebra);

}  // namespace qmb
