#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "acceptance/criteria.hpp"
#include "qmb/cli/runner.hpp"
#include "qmb/models.hpp"

namespace acceptance {

using namespace qmb;

namespace {

const ManifoldSpec kDisp = ManifoldSpec::coherent_displacement(0);

cplx amplitude(const RVec& theta) { return cplx(theta(0), theta(1)) / std::sqrt(2.0); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Result empty_cavity_exactness() {
  Stopwatch clock;
  CavityParams p;
  p.omega = 1.0;
  p.kappa = 1.0;
  const int dim = 20;
  DynamicsOptions opts;
  opts.mode = CoordinateMode::GradientFlow;
  opts.eta = 100.0 * p.kappa;
  Integrator integ(empty_cavity(p, dim), kDisp, opts);
  RVec th(2);
  th << std::sqrt(2.0), 0.0;
  CoupledState s{fock_state(dim, 0), th, RVec(), 0.0};
  NoisePath noise(42);
  const double dt = 1e-3 / p.kappa;
  const int steps = static_cast<int>(std::lround(5.0 / p.kappa / dt));
  double err = 0.0, defect = 0.0;
  for (int i = 0; i < steps; ++i) {
    s = integ.step(s, noise, dt);
    err = std::max(err, std::abs(integ.fixed_frame_expect(ops::a(), s) - cavity_amplitude(p, 1.0, s.t)));
    defect = std::max(defect, 1.0 - fidelity(s.sigma, fock_state(dim, 0)));
  }
  double secs = clock.seconds();
  return {err <= 1e-4 && defect <= 1e-6 && secs < 10.0,
          format("max |<a> - analytic| = %.2e, max vacuum infidelity = %.2e, %.1f s", err, defect, secs)};
}

Result drive_absorption() {
  CavityParams bare;
  bare.omega = 1.0;
  bare.kappa = 1.0;
  CavityParams driven = bare;
  driven.epsilon = 0.3;
  const int dim = 20;
  DynamicsOptions opts;
  opts.eta = 10.0;
  Integrator a(empty_cavity(bare, dim), kDisp, opts);
  Integrator b(empty_cavity(driven, dim), kDisp, opts);
  RVec th(2);
  th << 0.8, -0.4;
  CoupledState s{fock_state(dim, 0), th, RVec(), 0.0};
  NoisePath noise(3);
  const double dt = 1e-3;
  const cplx expected = -std::sqrt(driven.kappa) * driven.epsilon * dt;
  double worst = 0.0, op_diff = 0.0, step_gap = 0.0;
  for (int i = 0; i < 2000; ++i) {
    auto dW = wiener(noise, a.model().unravelings(), dt);
    Increment ia = a.increment(s, dW, dt), ib = b.increment(s, dW, dt);
    RVec gap_theta = ib.dtheta - ia.dtheta;
    cplx diff = cplx(gap_theta(0), gap_theta(1)) / std::sqrt(2.0);
    worst = std::max(worst, std::abs(diff - expected));
    CMat gap = ia.dK - ib.dK;
    op_diff = std::max(op_diff, (gap - gap(0, 0) * CMat::Identity(dim, dim)).cwiseAbs().maxCoeff());
    op_diff = std::max(op_diff, (ia.dvec - ib.dvec).cwiseAbs().maxCoeff());
    CoupledState sa = a.step(s, dW, dt);
    CoupledState sb = b.step(s, dW, dt);
    op_diff = std::max(op_diff, (sa.sigma.vec() - sb.sigma.vec()).cwiseAbs().maxCoeff());
    cplx step_diff = amplitude(sb.theta) - amplitude(sa.theta);
    step_gap = std::max(step_gap, std::abs(step_diff - expected));
    s = sb;
  }
  return {worst <= 1e-10 && op_diff <= 1e-10,
          format("max per-step d(alpha) discrepancy = %.2e, max state-increment operator difference = %.2e, "
                 "Heun step O(dt^2) remainder = %.2e",
                 worst, op_diff, step_gap)};
}

Result dpo_fixed_points() {
  Stopwatch clock;
  const std::vector<std::tuple<double, double, double, int>> sets{
      {1.0, 1.0, 2.5, 6000},  {1.0, 0.5, 1.5, 6000}, {1.0, 2.0, 3.0, 6000}, {1.0, 1.0, 1.5, 6000},
      {1.0, 0.25, 1.5, 6000}, {1.0, 1.0, 0.1, 10000}, {1.0, 0.5, 0.2, 12000}};
  double worst_above = 0.0, worst_below = 0.0;
  for (const auto& [kappa, beta2, chi, steps] : sets) {
    DpoParams p{kappa, beta2, chi};
    const int dim = std::max(16, dpo_min_dim(p));
    DynamicsOptions opts;
    opts.mode = CoordinateMode::Fiducial;
    opts.eta = 0.0;
    Integrator integ(dpo(p, dim), kDisp, opts);
    RVec th(2);
    th << 0.3, 0.1;
    CoupledState s{fock_state(dim, 0), th, RVec(), 0.0};
    const double dt = 0.002 / kappa;
    for (int i = 0; i < steps; ++i) s = integ.step(s, dt);
    double n = std::norm(amplitude(s.theta));
    if (chi > kappa / 2)
      worst_above = std::max(worst_above, std::abs(n - (chi - kappa / 2) / beta2));
    else
      worst_below = std::max(worst_below, n);
  }
  double secs = clock.seconds();
  return {worst_above <= 1e-6 && worst_below <= 1e-6 && secs < 30.0,
          format("5 sets above threshold: max ||alpha|^2 - target| = %.2e; below: max |alpha|^2 = %.2e; %.1f s",
                 worst_above, worst_below, secs)};
}

Result stochastic_frame_consistency() {
  CavityParams p;
  p.omega = 1.0;
  p.kappa = 1.0;
  const int dim = 30;
  ModelSpec model = empty_cavity(p, dim);
  DynamicsOptions opts;
  opts.eta = 10.0;
  Integrator moving(model, kDisp, opts);
  DynamicsOptions fixed_opts;
  fixed_opts.mode = CoordinateMode::FixedBasis;
  Integrator fixed(model, ManifoldSpec(), fixed_opts);
  CVec v = CVec::Zero(dim);
  v(0) = 1.0;
  v(1) = 1.0;
  v(2) = 0.5;
  QuantumState phi = QuantumState::pure(v / v.norm(), {dim});
  double worst = 0.0;
  for (std::uint64_t seed : {7, 8}) {
    RVec th(2);
    th << std::sqrt(2.0), 0.0;
    CoupledState s{phi, th, RVec(), 0.0};
    CoupledState r{to_fixed_frame(kDisp, th, phi), RVec(), RVec(), 0.0};
    NoisePath noise(seed);
    const double dt = 1e-3;
    for (int i = 0; i < 5000; ++i) {
      auto dW = wiener(noise, model.unravelings(), dt);
      s = moving.step(s, dW, dt);
      r = fixed.step(r, dW, dt);
      if (i % 250 == 249)
        worst = std::max(worst, fubini_study(to_fixed_frame(kDisp, s.theta, s.sigma).vec(), r.sigma.vec()));
    }
  }
  return {worst <= 1e-3, format("max Fubini-Study distance over two noise paths = %.2e", worst)};
}

Result master_equation_conservation() {
  const int dim = 15;
  ModelSpec model;
  model.dims = {dim};
  model.H = 0.7 * ops::n() + 0.2 * ops::ad().pow(2) * ops::a().pow(2) + 0.3 * (ops::a() + ops::ad());
  model.unobserved = {std::sqrt(0.8) * ops::a(), std::sqrt(0.1) * ops::a().pow(2)};
  QuantumState rho = QuantumState::mixed(coherent_state(dim, cplx(0.5, 0.2)).normalized().density(), {dim});
  const double dt = 1e-3;
  double trace_rate = 0.0, herm = 0.0;
  for (int i = 0; i < 2000; ++i) {
    double before = rho.rho().trace().real();
    rho = master_step(rho, model, ManifoldSpec(), RVec(), RVec(), dt, {});
    trace_rate = std::max(trace_rate, std::abs(rho.rho().trace().real() - before) / dt);
    herm = std::max(herm, (rho.rho() - rho.rho().adjoint()).cwiseAbs().maxCoeff());
  }

  const double kappa = 1.0;
  ModelSpec damped;
  damped.dims = {dim};
  damped.H = 1.3 * ops::n();
  damped.unobserved = {std::sqrt(kappa) * ops::a()};
  QuantumState d = QuantumState::mixed(fock_state(dim, 4).density(), {dim});
  const double n0 = 4.0;
  double rel = 0.0;
  for (int i = 1; i <= 3000; ++i) {
    d = master_step(d, damped, ManifoldSpec(), RVec(), RVec(), dt, {});
    if (i % 100 == 0) {
      double n = d.expect(number(dim).mat()).real();
      double exact = n0 * std::exp(-kappa * i * dt);
      rel = std::max(rel, std::abs(n / exact - 1.0));
    }
  }
  return {trace_rate <= 1e-8 && herm <= 1e-10 && rel <= 1e-6,
          format("trace drift %.2e per unit time, Hermiticity %.2e, <N> decay relative error %.2e", trace_rate, herm,
                 rel)};
}

Result noise_statistics() {
  const int n = 10000;
  const double dt = 0.01;
  NoisePath noise(2024);
  double mean_re = 0, mean_im = 0, power = 0, sq_re = 0, sq_im = 0, hom = 0;
  for (int i = 0; i < n; ++i) {
    auto w = wiener(noise, {Unraveling::Heterodyne, Unraveling::Homodyne}, dt);
    mean_re += w[0].real();
    mean_im += w[0].imag();
    power += std::norm(w[0]);
    cplx sq = w[0] * w[0];
    sq_re += sq.real();
    sq_im += sq.imag();
    hom += w[1].real() * w[1].real();
  }
  const double rn = std::sqrt(static_cast<double>(n));
  // z-scores against the exact per-sample standard deviations.
  const double z[] = {std::abs(mean_re / n) / (std::sqrt(dt / 2) / rn), std::abs(mean_im / n) / (std::sqrt(dt / 2) / rn),
                      std::abs(power / n - dt) / (dt / rn),          std::abs(sq_re / n) / (dt / rn),
                      std::abs(sq_im / n) / (dt / rn),               std::abs(hom / n - dt) / (std::sqrt(2.0) * dt / rn)};
  double zmax = 0;
  for (double v : z) zmax = std::max(zmax, v);

  CavityParams p;
  p.omega = 1.0;
  p.epsilon = 0.2;
  Integrator integ(empty_cavity(p, 12), kDisp, {});
  auto path = [&] {
    NoisePath nz(99);
    CoupledState s{fock_state(12, 1), RVec::Zero(2), RVec(), 0.0};
    std::vector<CVec> out;
    for (int i = 0; i < 200; ++i) {
      s = integ.step(s, nz, 1e-3);
      out.push_back(s.sigma.vec());
    }
    return out;
  };
  auto first = path(), second = path();
  bool identical = true;
  for (size_t i = 0; i < first.size(); ++i)
    for (int k = 0; k < first[i].size(); ++k) identical = identical && first[i](k) == second[i](k);

  auto cfg = cli::parse_config(cli::json::parse(R"({
    "model": {"builder": "empty_cavity", "dim": 10, "omega": 1.0, "kappa": 1.0, "epsilon": 0.3},
    "manifold": {"factors": [{"kind": "displacement", "sub": 0}]},
    "dynamics": {"mode": "gradient_flow", "dt": 0.01, "t_final": 0.3, "seed": 5, "n_trajectories": 3},
    "output": {"expectations": ["a"]}
  })"));
  namespace fs = std::filesystem;
  fs::path base = fs::temp_directory_path() / "qmb_acceptance_noise";
  fs::remove_all(base);
  cli::run(cfg, base / "a", 1);
  cli::run(cfg, base / "b", 2);
  bool same_files = true;
  for (const char* f : {"traj_0.jsonl", "traj_1.jsonl", "traj_2.jsonl", "summary.csv", "meta.json"})
    same_files = same_files && fs::exists(base / "a" / f) && slurp(base / "a" / f) == slurp(base / "b" / f);
  fs::remove_all(base);

  return {zmax <= 4.0 && identical && same_files,
          format("max z-score %.2f over 6 moment relations, bit-identical states %s, identical output files %s", zmax,
                 identical ? "yes" : "no", same_files ? "yes" : "no")};
}

}  // namespace acceptance
