#include "doctest.h"
#include "helpers.hpp"
#include "qmb/oppoly.hpp"

using namespace qmb;
using qmb::testing::max_abs;

TEST_CASE("polynomial matrices agree with operator factories") {
  const int d = 9;
  CHECK(max_abs(ops::a().matrix({d}) - annihilation(d).mat()) == 0.0);
  CHECK(max_abs(ops::n().matrix({d}) - number(d).mat()) < 1e-14);
  CHECK(max_abs(ops::q().matrix({d}) - position(d).mat()) < 1e-14);
  CHECK(max_abs(ops::p().matrix({d}) - momentum(d).mat()) < 1e-14);
  CHECK(max_abs(ops::s().matrix({d}) - squeeze_generator(d).mat()) < 1e-13);
  auto j = angular_momentum(1.5);
  CHECK(max_abs(ops::jz().matrix({4}) - j.jz.mat()) < 1e-14);
  CHECK(max_abs(ops::jx().matrix({4}) - j.jx().mat()) < 1e-14);
  CHECK(max_abs(ops::jy().matrix({4}) - j.jy().mat()) < 1e-14);
}

TEST_CASE("products, adjoints and powers") {
  const Dims dims{6, 5};
  OpPoly x = ops::a(0) * ops::ad(1) + 2.0 * ops::n(0) + OpPoly::scalar(cplx(0, 1));
  CMat X = x.matrix(dims);
  CHECK(max_abs(x.adjoint().matrix(dims) - X.adjoint()) < 1e-14);
  CHECK(max_abs((x * x).matrix(dims) - X * X) < 1e-12);
  CHECK(max_abs(x.pow(3).matrix(dims) - X * X * X) < 1e-11);
  CHECK(x.scalar_part() == cplx(0, 1));
  CHECK(x.max_sub() == 1);
  CHECK((x - x).is_zero());
  CHECK(OpPoly().max_sub() == -1);
}

TEST_CASE("letters on different subsystems commute symbolically") {
  OpPoly lhs = ops::a(0) * ops::a(1);
  OpPoly rhs = ops::a(1) * ops::a(0);
  CHECK((lhs - rhs).is_zero());
  OpPoly same = ops::a(0) * ops::ad(0) - ops::ad(0) * ops::a(0);
  CHECK_FALSE(same.is_zero());
}

TEST_CASE("substitution maps letters") {
  // a → a + 2 gives (a† + 2)(a + 2) = n + 2a + 2a† + 4.
  auto shift = [](const Letter& l) {
    if (l.gen == Gen::A) return ops::a(l.sub) + OpPoly::scalar(2.0);
    return ops::ad(l.sub) + OpPoly::scalar(2.0);
  };
  OpPoly out = ops::n().substitute(shift);
  OpPoly oracle = ops::n() + 2.0 * ops::a() + 2.0 * ops::ad() + OpPoly::scalar(4.0);
  CHECK((out - oracle).is_zero());
}

TEST_CASE("matrix cache matches direct evaluation") {
  const Dims dims{5, 4};
  MatrixCache cache(dims);
  OpPoly x = ops::ad(0).pow(2) * ops::a(0) + ops::jz(1) * 0.5 + OpPoly::scalar(3.0);
  CHECK(max_abs(cache.matrix(x) - x.matrix(dims)) < 1e-13);
  CHECK(max_abs(cache.matrix(x) - cache.matrix(x)) == 0.0);
  CMat without = cache.matrix_without_scalar(x);
  CHECK(max_abs(without + 3.0 * CMat::Identity(20, 20) - x.matrix(dims)) < 1e-13);
}

TEST_CASE("rendering") {
  CHECK_FALSE(ops::n().to_string().empty());
  CHECK(OpPoly().to_string() == "0");
}
