#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "qmb/lie.hpp"

using namespace qmb;
using qmb::testing::max_abs;

namespace {

const int kDim = 30;
const Dims kDims{kDim};

LieAlgebra heisenberg(int d = kDim) {
  return LieAlgebra({position(d).mat(), momentum(d).mat(), CMat::Identity(d, d)}, {d});
}

LieAlgebra su2(double J) {
  auto j = angular_momentum(J);
  const int d = j.jz.size();
  return LieAlgebra({j.jx().mat(), j.jy().mat(), j.jz.mat()}, {d}, 0);
}

// Σ_m S_km Y_m
CMat combine_row(const LieAlgebra& alg, const CMat& S, int k) {
  CMat out = CMat::Zero(alg.basis()[0].rows(), alg.basis()[0].cols());
  for (int m = 0; m < alg.dim(); ++m) out += S(k, m) * alg.basis()[m];
  return out;
}

}  // namespace

TEST_CASE("structure constants of the Heisenberg and su(2) algebras") {
  LieAlgebra h = heisenberg();
  // [q, p] = i·𝟙
  CHECK(std::abs(h.c(0, 1, 2) - I) < 1e-12);
  CHECK(std::abs(h.c(1, 0, 2) + I) < 1e-12);
  CHECK(std::abs(h.c(0, 1, 0)) < 1e-12);

  LieAlgebra s = su2(1.0);
  // [J_x, J_y] = i J_z and cyclic.
  CHECK(std::abs(s.c(0, 1, 2) - I) < 1e-12);
  CHECK(std::abs(s.c(1, 2, 0) - I) < 1e-12);
  CHECK(std::abs(s.c(2, 0, 1) - I) < 1e-12);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) CHECK(std::abs(s.c(j, k, l) + s.c(k, j, l)) < 1e-12);
}

TEST_CASE("non-closing sets are rejected") {
  const int d = 12;
  // [q, p] = i·𝟙 leaves the span of {q, p}.
  CHECK_THROWS(LieAlgebra({position(d).mat(), momentum(d).mat()}, {d}));
  CHECK_NOTHROW(LieAlgebra({position(d).mat(), squeeze_generator(d).mat()}, {d}));
}

TEST_CASE("coefficients round trip") {
  LieAlgebra h = heisenberg();
  CVec x(3);
  x << cplx(0.3, 0.1), -1.2, cplx(0, 2);
  CHECK((h.coefficients(h.combine(x)) - x).norm() < 1e-10);
}

TEST_CASE("adjoint_single basic properties") {
  LieAlgebra h = heisenberg();
  auto t = ChainedTransform::from_hermitian(h, {momentum(kDim).mat(), -position(kDim).mat()});
  CHECK(max_abs(adjoint_single(t, 0, 0.0) - CMat::Identity(3, 3)) < 1e-15);
  CMat a = adjoint_single(t, 0, 0.7), b = adjoint_single(t, 0, -0.4), ab = adjoint_single(t, 0, 0.3);
  CHECK(max_abs(a * b - ab) < 1e-10);
  CHECK(max_abs(adjoint_single(t, 0, 0.7) * adjoint_single(t, 0, -0.7) - CMat::Identity(3, 3)) < 1e-10);

  // U†aU = a + (Q + iP)/√2 from the adjoint matrix acting on basis coefficients.
  const double Q = 0.8, P = -0.5;
  RVec eta(2);
  eta << Q, P;
  CMat S = adjoint_chain(t, eta);
  CMat Sexp(3, 3);
  Sexp << 1, 0, Q, 0, 1, P, 0, 0, 1;
  CHECK(max_abs(S - Sexp) < 1e-10);
  CVec a_coeff(3);
  a_coeff << 1.0 / std::sqrt(2.0), I / std::sqrt(2.0), 0.0;
  CVec image = S.transpose() * a_coeff;
  CHECK(std::abs(image(2) - cplx(Q, P) / std::sqrt(2.0)) < 1e-10);

  LieAlgebra s = su2(1.0);
  auto rot = ChainedTransform::from_hermitian(s, {s.basis()[2]});
  CHECK(max_abs(adjoint_single(rot, 0, 2 * M_PI) - CMat::Identity(3, 3)) < 1e-10);
}

TEST_CASE("explicit conjugation matches the adjoint matrix") {
  const int d = 80;
  LieAlgebra h = heisenberg(d);
  auto t = ChainedTransform::from_hermitian(h, {momentum(d).mat(), -position(d).mat()});
  RVec eta(2);
  eta << 0.6, 0.9;
  CMat U = chain_unitary(t, eta);
  CHECK(max_abs(U.adjoint() * U - CMat::Identity(d, d)) < 1e-9);
  CMat S = adjoint_chain(t, eta);
  for (int k = 0; k < 3; ++k)
    CHECK(interior_max_diff(U.adjoint() * h.basis()[k] * U, combine_row(h, S, k), {d}, 40) < 1e-8);

  LieAlgebra s = su2(1.5);
  auto chain = ChainedTransform::from_hermitian(s, {s.basis()[2], s.basis()[0], s.basis()[1]});
  RVec ang(3);
  ang << 0.4, -1.1, 0.3;
  CMat V = chain_unitary(chain, ang);
  CMat Ss = adjoint_chain(chain, ang);
  for (int k = 0; k < 3; ++k) CHECK(max_abs(V.adjoint() * s.basis()[k] * V - combine_row(s, Ss, k)) < 1e-10);
}

TEST_CASE("right generators from the chain") {
  LieAlgebra h = heisenberg();
  const CMat q = position(kDim).mat(), p = momentum(kDim).mat(), one = CMat::Identity(kDim, kDim);
  auto t = ChainedTransform::from_hermitian(h, {p, -q});

  RVec zero = RVec::Zero(2);
  auto F0 = right_generators_from_chain(t, zero);
  CHECK(interior_max_diff(F0[0], p, kDims) < 1e-10);
  CHECK(interior_max_diff(F0[1], -q, kDims) < 1e-10);

  const double Q = 0.7, P = -0.3;
  RVec eta(2);
  eta << Q, P;
  auto F = right_generators_from_chain(t, eta);
  for (const auto& f : F) CHECK(max_abs(f - f.adjoint()) < 1e-10);
  // Chained form e^{−iQp}e^{iPq} differs from the single exponential only by
  // identity multiples: F₁ = p + P/2 + (P/2)𝟙, F₂ = −q − Q/2 + (Q/2)𝟙.
  CHECK(interior_max_diff(F[0] - (p + 0.5 * P * one), 0.5 * P * one, kDims) < 1e-9);
  CHECK(interior_max_diff(F[1] - (-q - 0.5 * Q * one), 0.5 * Q * one, kDims) < 1e-9);

  const double eps = 1e-5;
  CMat U = chain_unitary(t, eta);
  for (int j = 0; j < 2; ++j) {
    RVec plus = eta, minus = eta;
    plus(j) += eps;
    minus(j) -= eps;
    CMat fd = I * U.adjoint() * (chain_unitary(t, plus) - chain_unitary(t, minus)) / (2 * eps);
    CHECK(interior_max_diff(fd, F[j], kDims, 10) < 1e-8);
  }
}

TEST_CASE("adjoint updates") {
  LieAlgebra h = heisenberg();
  AdjointState id = AdjointState::identity(3);
  CHECK(max_abs(adjoint_update(id, RVec::Zero(3), h).S - id.S) == 0.0);

  // The Heisenberg adjoint representation is nilpotent, so Euler steps are exact.
  RVec step(3);
  step << 1e-3, -2e-3, 5e-4;
  AdjointState acc = id;
  for (int i = 0; i < 500; ++i) acc = adjoint_update(acc, step, h);
  AdjointState exact = adjoint_update_exact(id, 500 * step, h);
  CHECK(max_abs(acc.S - exact.S) < 1e-10);

  // Exact update tracks W Y_k W† with W = e^{−iΣμ_j Y_j}.
  const int d = 80;
  LieAlgebra wide = heisenberg(d);
  AdjointState wide_exact = adjoint_update_exact(id, 500 * step, wide);
  CMat W = expm_hermitian(wide.combine((500 * step).cast<cplx>()), 1.0);
  for (int k = 0; k < 3; ++k)
    CHECK(interior_max_diff(W * wide.basis()[k] * W.adjoint(), combine_row(wide, wide_exact.S, k), {d}, 40) < 1e-10);

  LieAlgebra s = su2(1.0);
  RVec rot(3);
  rot << 1e-3, 0.5e-3, -1e-3;
  AdjointState r = id;
  for (int i = 0; i < 1000; ++i) r = adjoint_update(r, rot, s);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(r.S.row(k).norm() - 1.0) < 5e-3);
  CHECK(std::abs(r.S.determinant()) > 1e-8);
}
