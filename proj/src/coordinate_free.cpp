#include <cmath>

#include "qmb/complexity.hpp"

namespace qmb {

namespace {

struct CfLocal {
  double value;
  RVec y;
  RMat h;
};

CfLocal local_model(const LieAlgebra& alg, const RVec& m, const QuantumState& sigma) {
  const int q = alg.dim();
  CfLocal out;
  out.value = sigma.populations().dot(m);
  out.y.resize(q);
  out.h.resize(q, q);
  std::vector<CMat> Z(q);
  for (int j = 0; j < q; ++j) {
    Z[j] = diag_commutator(m, alg.basis()[j]);
    out.y(j) = (I * sigma.expect(Z[j])).real();
  }
  for (int j = 0; j < q; ++j)
    for (int k = j; k < q; ++k) {
      double v = 0.5 * (expect_commutator(sigma, alg.basis()[k], Z[j]).real() +
                        expect_commutator(sigma, alg.basis()[j], Z[k]).real());
      out.h(j, k) = out.h(k, j) = v;
    }
  return out;
}

// σ ← e^{iG} σ e^{−iG} with G = Σ δμ_j Y_j.
QuantumState rotate(const LieAlgebra& alg, const QuantumState& sigma, const RVec& dmu) {
  CMat G = alg.combine(dmu.cast<cplx>());
  CMat V = expm_hermitian(G, -1.0);
  if (sigma.is_pure()) return QuantumState::pure(V * sigma.vec(), sigma.dims());
  return QuantumState::mixed(V * sigma.rho() * V.adjoint(), sigma.dims());
}

}  // namespace

CoordinateFreeResult minimize_coordinate_free(const LieAlgebra& alg, const RVec& m, const QuantumState& rho,
                                              const CoordinateFreeOptions& opts) {
  for (const auto& b : alg.basis())
    if ((b - b.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("coordinate-free optimization needs a Hermitian algebra basis");
  QuantumState sigma = rho.normalized();
  AdjointState S = AdjointState::identity(alg.dim());
  CfLocal lm = local_model(alg, m, sigma);
  int it = 0;
  for (; it < opts.max_iter && lm.y.norm() > opts.tol; ++it) {
    // The identity direction makes h singular; the pseudo-inverse ignores it.
    Eigen::CompleteOrthogonalDecomposition<RMat> cod(lm.h);
    cod.setThreshold(1e-10);
    RVec dmu = -cod.solve(lm.y);
    double t = 1.0;
    QuantumState trial = rotate(alg, sigma, dmu);
    for (int ls = 0; ls < 40; ++ls) {
      double v = trial.populations().dot(m);
      if (v <= lm.value + 1e-14 * (1.0 + std::abs(lm.value))) break;
      t *= 0.5;
      trial = rotate(alg, sigma, t * dmu);
    }
    sigma = trial.normalized();
    S = adjoint_update_exact(S, t * dmu, alg);
    lm = local_model(alg, m, sigma);
  }
  if (lm.y.norm() > opts.tol) throw NonConvergence("coordinate-free optimizer did not converge", RVec());
  return {sigma, S.S, lm.value, lm.y.norm(), it};
}

}  // namespace qmb
