#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "qmb/gibbs.hpp"

using namespace qmb;
using qmb::testing::max_abs;

namespace {

const double kInfinity = std::numeric_limits<double>::infinity();

PenaltyTerm number_term(int sub = 0) { return PenaltyTerm{sub, 1.0, [](int n) { return double(n); }}; }

RVec one(double b) { return RVec::Constant(1, b); }

double thermal_entropy(double nbar) { return (nbar + 1) * std::log(nbar + 1) - nbar * std::log(nbar); }

}  // namespace

TEST_CASE("Gibbs populations of the number penalty are geometric") {
  const int d = 60;
  const double b = std::log(2.0);
  RVec p = gibbs_populations({number_term()}, one(b), {d});
  for (int n = 0; n < 20; ++n) CHECK(p(n) == doctest::Approx((1 - std::exp(-b)) * std::exp(-b * n)).epsilon(1e-12));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));

  RVec cold = gibbs_populations({number_term()}, one(50.0), {d});
  CHECK(cold(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cold.tail(d - 1).maxCoeff() < 1e-20);

  RVec zero_t = gibbs_populations({number_term()}, one(kInfinity), {d});
  CHECK(zero_t(0) == 1.0);
  CHECK(zero_t.tail(d - 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-mode Gibbs state is a product") {
  const Dims dims{40, 30};
  RVec b(2);
  b << std::log(2.0), std::log(3.0);
  QuantumState chi = gibbs_state(GibbsSpec{{number_term(0), number_term(1)}, b, {}, {}}, dims);
  RVec p0 = gibbs_populations({number_term(0)}, one(b(0)), {40});
  RVec p1 = gibbs_populations({number_term(0)}, one(b(1)), {30});
  RVec pops = chi.populations();
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 30; ++j) CHECK(std::abs(pops(flatten({i, j}, dims)) - p0(i) * p1(j)) < 1e-15);
}

TEST_CASE("truncation tail guard") {
  CHECK_THROWS_AS(gibbs_populations({number_term()}, one(0.01), {10}), InsufficientDimension);
  CHECK_NOTHROW(gibbs_populations({number_term()}, one(0.01), {10}, false));
  CHECK_THROWS(gibbs_populations({number_term()}, one(-1.0), {10}));
}

TEST_CASE("log partition derivative is minus the Gibbs mean") {
  const Dims dims{50};
  PenaltyTerm m{0, 1.0, [](int n) { return n + 0.25 * n * n; }};
  for (double b : {0.2, 0.7, 1.5}) {
    const double h = 1e-5;
    double fd = (log_partition({m}, one(b + h), dims) - log_partition({m}, one(b - h), dims)) / (2 * h);
    double mean = gibbs_populations({m}, one(b), dims).dot(penalty_diagonal(std::vector<PenaltyTerm>{m}, dims));
    CHECK(fd == doctest::Approx(-mean).epsilon(1e-7));
  }
  CHECK(log_partition({number_term()}, one(std::log(2.0)), {60}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("relative entropy") {
  const int d = 60;
  GibbsSpec g{{number_term()}, one(std::log(2.0)), {}, {}};
  QuantumState chi = gibbs_state(g, {d});
  CHECK(std::abs(relative_entropy(chi, g)) < 1e-10);

  // A pure state with the same mean number: S(ρ‖χ) = H(χ).
  CHECK(relative_entropy(fock_state(d, 1), g) == doctest::Approx(thermal_entropy(1.0)).epsilon(1e-10));

  GibbsSpec frozen{{number_term()}, one(kInfinity), {}, {}};
  CHECK(relative_entropy(fock_state(d, 0), frozen) == 0.0);
  CHECK(std::isinf(relative_entropy(fock_state(d, 1), frozen)));

  // Same Gibbs state in a displaced frame.
  RVec th(2);
  th << 0.6, -0.4;
  GibbsSpec moved{{number_term()}, one(1.2), ManifoldSpec::coherent_displacement(), th};
  QuantumState chi_moved = gibbs_state(moved, {d});
  CHECK(std::abs(relative_entropy(chi_moved, moved)) < 1e-8);

  // Coherent state against a cold displaced reference.
  cplx alpha = cplx(th(0), th(1)) / std::sqrt(2.0);
  GibbsSpec cold{{number_term()}, one(30.0), ManifoldSpec::coherent_displacement(), th};
  CHECK(relative_entropy(coherent_state(d, alpha).normalized(), cold) < 1e-8);
}

TEST_CASE("relative entropy agrees with the spectral form and is non-negative") {
  std::mt19937_64 rng(17);
  const int d = 40;
  RVec th(2);
  th << 0.3, 0.2;
  GibbsSpec g{{number_term()}, one(0.9), ManifoldSpec::coherent_displacement(), th};
  QuantumState chi = gibbs_state(g, {d});
  for (int trial = 0; trial < 5; ++trial) {
    QuantumState r = random_mixed({d}, 8, 4, rng);
    double s = relative_entropy(r, g);
    CHECK(s >= -1e-10);
    CHECK(s == doctest::Approx(relative_entropy_direct(r, chi)).epsilon(1e-6));
  }
}

TEST_CASE("weight fits") {
  const int d = 60;
  BetaFit one_photon = fit_beta(thermal_state(d, 1.0), {number_term()}, {}, {});
  CHECK(one_photon.beta(0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_FALSE(one_photon.zero_temperature[0]);
  CHECK_FALSE(one_photon.experimental);

  BetaFit fock_one = fit_beta(fock_state(d, 1), {number_term()}, {}, {});
  CHECK(fock_one.beta(0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  BetaFit vac = fit_beta(fock_state(d, 0), {number_term()}, {}, {});
  CHECK(std::isinf(vac.beta(0)));
  CHECK(vac.zero_temperature[0]);

  const Dims dims{40, 80};
  QuantumState prod = product_state({fock_state(40, 1), fock_state(80, 2)});
  BetaFit two = fit_beta(prod, {number_term(0), number_term(1)}, {}, {});
  CHECK(two.beta(0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(two.beta(1) == doctest::Approx(std::log(1.5)).epsilon(1e-9));

  // A coherent state is vacuum in its own displaced frame.
  RVec th(2);
  th << 1.0, 0.5;
  BetaFit framed = fit_beta(coherent_state(d, cplx(1.0, 0.5) / std::sqrt(2.0)).normalized(), {number_term()},
                            ManifoldSpec::coherent_displacement(), th);
  CHECK(framed.zero_temperature[0]);

  QuantumState flat = QuantumState::mixed(0.25 * CMat::Identity(4, 4), {4});
  CHECK_THROWS_AS(fit_beta(flat, {number_term()}, {}, {}), DegenerateFit);
}

TEST_CASE("coupled weight fit recovers the generating weights") {
  const Dims dims{40};
  std::vector<PenaltyTerm> terms{number_term(), PenaltyTerm{0, 1.0, [](int n) { return double(n) * n; }}};
  RVec b(2);
  b << 0.3, 0.05;
  QuantumState chi = gibbs_state(GibbsSpec{terms, b, {}, {}}, dims);
  BetaFit fit = fit_beta(chi, terms, {}, {});
  CHECK(fit.experimental);
  CHECK((fit.beta - b).norm() < 1e-7);
}

TEST_CASE("quadratic expansion at the reference state") {
  const int d = 60;
  const double nbar = 1.0;
  RVec th(2);
  th << -0.5, 0.8;
  GibbsSpec g{{number_term()}, one(std::log(1 + 1 / nbar)), ManifoldSpec::coherent_displacement(), th};
  QuantumState chi = gibbs_state(g, {d});
  QuadraticExpansion qe = quadratic_expansion(chi, g);
  CHECK(std::abs(qe.z(0)) < 1e-9);
  CHECK(qe.y.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(qe.g(0, 0) == doctest::Approx(nbar * (nbar + 1)).epsilon(1e-9));
  CHECK(max_abs(qe.h - qe.h.transpose()) < 1e-12);
  Eigen::SelfAdjointEigenSolver<RMat> es(qe.h);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  GibbsSpec frozen = g;
  frozen.beta = one(kInfinity);
  CHECK_THROWS(quadratic_expansion(chi, frozen));
}

TEST_CASE("quadratic expansion off the reference state") {
  const int d = 50;
  GibbsSpec g{{number_term()}, one(0.8), ManifoldSpec::coherent_displacement(), RVec::Zero(2)};
  QuantumState coh = coherent_state(d, cplx(0.5, 0.0)).normalized();
  QuadraticExpansion qe = quadratic_expansion(coh, g);
  double chi_mean = 1.0 / (std::exp(0.8) - 1.0);
  CHECK(qe.z(0) == doctest::Approx(0.25 - chi_mean).epsilon(1e-8));
  // F = (p, −q) at the origin: i[N, p] = −q and i[N, −q] = −p.
  CHECK(qe.y_kj(0, 0) == doctest::Approx(-std::sqrt(2.0) * 0.5).epsilon(1e-8));
  CHECK(std::abs(qe.y_kj(0, 1)) < 1e-10);
  CHECK(qe.y(0) == doctest::Approx(0.8 * qe.y_kj(0, 0)).epsilon(1e-12));
}
