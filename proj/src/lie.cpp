#include "qmb/lie.hpp"

#include <cmath>

namespace qmb {

namespace {

CVec interior_vec(const CMat& m, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  CVec v(k * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) v(i * k + j) = m(idx[i], idx[j]);
  return v;
}

}  // namespace

LieAlgebra::LieAlgebra(std::vector<CMat> basis, Dims dims, int exclude_top)
    : basis_(std::move(basis)), dims_(std::move(dims)), exclude_top_(exclude_top) {
  const int q = dim();
  if (q == 0) throw InvalidArgument("empty Lie algebra basis");
  const int n = total_dim(dims_);
  for (const auto& b : basis_)
    if (b.rows() != n || b.cols() != n) throw DimensionMismatch("basis element size");
  auto idx = interior_indices(dims_, exclude_top_);
  if (idx.empty()) throw InvalidDimension("no interior subspace left after exclusion");
  design_.resize(static_cast<Eigen::Index>(idx.size() * idx.size()), q);
  for (int k = 0; k < q; ++k) design_.col(k) = interior_vec(basis_[k], idx);
  Eigen::ColPivHouseholderQR<CMat> qr(design_);
  if (qr.rank() < q) throw InvalidArgument("Lie algebra basis is linearly dependent on the interior");

  c_.assign(q, CMat::Zero(q, q));
  for (int j = 0; j < q; ++j)
    for (int k = 0; k < q; ++k) {
      CVec target = interior_vec(commutator(basis_[j], basis_[k]), idx);
      CVec coeff = qr.solve(target);
      double resid = (design_ * coeff - target).cwiseAbs().maxCoeff();
      if (resid > 1e-10) throw InvalidArgument("basis does not close under commutation");
      for (int l = 0; l < q; ++l) c_[j](k, l) = std::abs(coeff(l)) < 1e-14 ? cplx(0) : coeff(l);
    }
  for (int j = 0; j < q; ++j)
    for (int k = 0; k < q; ++k)
      if ((c_[j].row(k) + c_[k].row(j)).cwiseAbs().maxCoeff() > 1e-10)
        throw NumericError("structure constants are not antisymmetric");
}

CVec LieAlgebra::coefficients(const CMat& op) const {
  auto idx = interior_indices(dims_, exclude_top_);
  CVec target = interior_vec(op, idx);
  CVec coeff = design_.colPivHouseholderQr().solve(target);
  if ((design_ * coeff - target).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidArgument("operator is not in the Lie algebra");
  return coeff;
}

CMat LieAlgebra::combine(const CVec& coeffs) const {
  CMat out = CMat::Zero(basis_[0].rows(), basis_[0].cols());
  for (int k = 0; k < dim(); ++k) out += coeffs(k) * basis_[k];
  return out;
}

ChainedTransform ChainedTransform::from_hermitian(const LieAlgebra& algebra, const std::vector<CMat>& F) {
  ChainedTransform t;
  t.algebra = &algebra;
  t.R.resize(static_cast<Eigen::Index>(F.size()), algebra.dim());
  for (size_t j = 0; j < F.size(); ++j) t.R.row(j) = (I * algebra.coefficients(F[j])).transpose();
  return t;
}

CMat adjoint_single(const ChainedTransform& t, int j, double coordinate) {
  if (j < 0 || j >= t.n()) throw InvalidArgument("chain index out of range");
  const LieAlgebra& alg = *t.algebra;
  const int q = alg.dim();
  CMat A = CMat::Zero(q, q);
  for (int h = 0; h < q; ++h)
    if (t.R(j, h) != cplx(0)) A += t.R(j, h) * alg.ad(h);
  return expm_general(coordinate * A);
}

CMat adjoint_chain(const ChainedTransform& t, const RVec& coordinates) {
  if (coordinates.size() != t.n()) throw InvalidArgument("coordinate count");
  CMat S = CMat::Identity(t.algebra->dim(), t.algebra->dim());
  for (int j = 0; j < t.n(); ++j) S = S * adjoint_single(t, j, coordinates(j));
  return S;
}

std::vector<CMat> right_generators_from_chain(const ChainedTransform& t, const RVec& coordinates) {
  if (coordinates.size() != t.n()) throw InvalidArgument("coordinate count");
  const int n = t.n();
  const int q = t.algebra->dim();
  std::vector<CMat> out(n);
  CMat right = CMat::Identity(q, q);
  for (int j = n - 1; j >= 0; --j) {
    // X_j^> coefficients: R_j · S^{(j+1)} ⋯ S^{(n)}; F_j^> = −i X_j^>.
    CVec coeff = (t.R.row(j) * right).transpose();
    out[j] = -I * t.algebra->combine(coeff);
    right = adjoint_single(t, j, coordinates(j)) * right;
  }
  return out;
}

CMat chain_unitary(const ChainedTransform& t, const RVec& coordinates) {
  if (coordinates.size() != t.n()) throw InvalidArgument("coordinate count");
  const LieAlgebra& alg = *t.algebra;
  const int n = static_cast<int>(alg.basis()[0].rows());
  CMat U = CMat::Identity(n, n);
  for (int j = 0; j < t.n(); ++j) {
    // V_j = exp(−η X_j) = exp(−i η F_j) with F_j = −i X_j.
    CMat F = -I * alg.combine(t.R.row(j).transpose());
    if ((F - F.adjoint()).cwiseAbs().maxCoeff() < 1e-12)
      U = U * expm_hermitian(F, coordinates(j));
    else
      U = U * expm_general(-coordinates(j) * alg.combine(t.R.row(j).transpose()));
  }
  return U;
}

AdjointState AdjointState::identity(int q) { return {CMat::Identity(q, q)}; }

static CMat adjoint_generator(const RVec& dmu, const LieAlgebra& algebra) {
  if (dmu.size() != algebra.dim()) throw InvalidArgument("dmu length must equal algebra dimension");
  const int q = algebra.dim();
  CMat B = CMat::Zero(q, q);
  for (int j = 0; j < q; ++j)
    if (dmu(j) != 0.0) B += (-I * dmu(j)) * algebra.ad(j);
  return B;
}

AdjointState adjoint_update(const AdjointState& s, const RVec& dmu, const LieAlgebra& algebra) {
  return {s.S + adjoint_generator(dmu, algebra) * s.S};
}

AdjointState adjoint_update_exact(const AdjointState& s, const RVec& dmu, const LieAlgebra& algebra) {
  return {expm_general(adjoint_generator(dmu, algebra)) * s.S};
}

}  // namespace qmb
