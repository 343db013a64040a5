#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "qmb/hilbert.hpp"
#include "qmb/lie.hpp"
#include "qmb/manifolds.hpp"

namespace qmb {

// Spectral map f applied to a counting operator (a†a for modes, J_z + J for spins).
using SpectralMap = std::function<double(int)>;

struct PenaltyTerm {
  int sub = 0;
  double weight = 1.0;
  SpectralMap f = [](int n) { return static_cast<double>(n); };
};

enum class FunctionalKind { Expectation, CGF };

struct PenaltyFunctional {
  std::vector<PenaltyTerm> terms;
  FunctionalKind kind = FunctionalKind::Expectation;
  double lambda = 0.0;

  static PenaltyFunctional number(int sub = 0);
  static PenaltyFunctional spectral(SpectralMap f, int sub = 0);
  // Σ_k N_k over the listed subsystems.
  static PenaltyFunctional total_number(const std::vector<int>& subs);
  PenaltyFunctional cgf(double lambda) const;
  void validate() const;
};

class CgfDivergence : public Error {
 public:
  using Error::Error;
};
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& msg, RVec best, double gnorm = std::numeric_limits<double>::quiet_NaN())
      : Error(msg), best_iterate(std::move(best)), gradient_norm(gnorm) {}
  RVec best_iterate;
  double gradient_norm;
};
class BoundUnavailable : public Error {
 public:
  using Error::Error;
};

// Diagonal of Σ_k weight_k f_k(n_k) over the product basis.
RVec penalty_diagonal(const std::vector<PenaltyTerm>& terms, const Dims& dims);
RVec penalty_diagonal(const PenaltyFunctional& functional, const Dims& dims);

// ln Σ_i p_i e^{λ m_i}
double log_mgf(const RVec& populations, const RVec& diag, double lambda);

double evaluate(const PenaltyFunctional& functional, const ManifoldSpec& spec, const RVec& theta,
                const QuantumState& state);

struct GradientHessianOps {
  std::vector<CMat> Y;                // Y_j = i[M, F_j]
  std::vector<std::vector<CMat>> H;   // H_jk = [F_j, [M, F_k]] + i[M, ∂_j F_k]
};

// Gradient and Hessian operators for a diagonal penalty with diagonal `m`.
GradientHessianOps gradient_hessian_ops(const RVec& m, const std::vector<CMat>& F,
                                        const std::vector<std::vector<CMat>>& dF);
GradientHessianOps gradient_hessian_ops(const PenaltyFunctional& functional, const ManifoldSpec& spec,
                                        const RVec& theta, const Dims& dims);

// ⟨[A, B]⟩ without forming the product matrix for pure states.
cplx expect_commutator(const QuantumState& state, const CMat& A, const CMat& B);
// Apply the diagonal commutator [diag(m), X].
CMat diag_commutator(const RVec& m, const CMat& X);

struct LocalModel {
  double value;
  RVec gradient;
  RMat hessian;
};

// Value, gradient and Hessian of the functional at θ (CGF via the chain rule).
LocalModel gradient_hessian(const PenaltyFunctional& functional, const ManifoldSpec& spec, const RVec& theta,
                            const QuantumState& state);
RVec cgf_gradient(const PenaltyFunctional& functional, const ManifoldSpec& spec, const RVec& theta,
                  const QuantumState& state);

struct MinimizeOptions {
  double tol = 1e-9;
  int max_iter = 100;
  double gd_step = 0.1;
};

struct Optimum {
  RVec theta;
  double value = 0.0;
  double gradient_norm = 0.0;
  RVec hessian_spectrum;
  int iterations = 0;
  bool used_gradient_fallback = false;
};

Optimum minimize(const PenaltyFunctional& functional, const ManifoldSpec& spec, const QuantumState& state,
                 const RVec& theta0, const MinimizeOptions& opts = {});

// (Q, P) per displaced mode such that ⟨a⟩ vanishes in the moving frame.
RVec closed_form_displacement(const QuantumState& state, const ManifoldSpec& spec);
RVec closed_form_displacement(const QuantumState& state);

struct ConvexityReport {
  bool delta2_ok = true;
  bool gamma_ok = true;
  bool gamma_minus_xi_ok = true;
  // First level at which a condition fails; n_max + 1 when none fails.
  int n_star = 0;
  std::vector<long double> delta2;  // Δ²_f(n−1)
  std::vector<long double> gamma;
  std::vector<long double> xi;
};

using LongSpectralMap = std::function<long double(long double)>;
ConvexityReport convexity_check(const LongSpectralMap& f, int n_max);

struct ChernoffResult {
  double lambda_star;
  double log_tail_bound;
  double N0;
  bool capped = false;
};

// Legendre-optimal Chernoff bound for P[m ≥ N0] under the distribution (p_i, m_i).
ChernoffResult chernoff_bound(const RVec& populations, const RVec& values, double N0, double lambda_cap = 60.0);
ChernoffResult chernoff_truncation(const QuantumState& state, const ManifoldSpec& spec, const RVec& theta,
                                   double N0, const PenaltyFunctional& counting);
// Smallest integer N0 whose Chernoff bound is ≤ ln(10^{−digits}).
ChernoffResult chernoff_levels_for_accuracy(const RVec& populations, const RVec& values, double digits);
double exact_tail(const RVec& populations, const RVec& values, double N0);

// Eigenvalues (λ₊, λ₋) of the spin-coherent Hessian for M = J_z + J, evaluated in σ.
std::pair<double, double> spin_hessian_eigs(const RVec& theta, const QuantumState& sigma);

struct CoordinateFreeOptions {
  double tol = 1e-10;
  int max_iter = 100;
};

struct CoordinateFreeResult {
  QuantumState sigma;
  CMat S;  // U Y_k U† = Σ_m S_km Y_m
  double value;
  double gradient_norm;
  int iterations;
};

// Newton iteration driven by the Lie-algebra basis itself, updating σ and the
// adjoint element without coordinates.
CoordinateFreeResult minimize_coordinate_free(const LieAlgebra& algebra, const RVec& m, const QuantumState& rho,
                                              const CoordinateFreeOptions& opts = {});

}  // namespace qmb
