#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "qmb/complexity.hpp"
#include "qmb/gibbs.hpp"
#include "qmb/manifolds.hpp"
#include "qmb/oppoly.hpp"

namespace qmb {

enum class Unraveling { Heterodyne, Homodyne };

struct Channel {
  OpPoly op;
  Unraveling unraveling = Unraveling::Heterodyne;
};

// Model in ℏ = 1 units. Observed channels are unravelled; unobserved channels
// enter only through the master equation.
struct ModelSpec {
  Dims dims;
  OpPoly H;
  std::vector<Channel> observed;
  std::vector<OpPoly> unobserved;

  void validate() const;
  // Largest |coefficient|² among channel monomials.
  double max_decay_rate() const;
  std::vector<Unraveling> unravelings() const;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};
class StepSizeError : public Error {
 public:
  using Error::Error;
};
class ProjectionSingular : public Error {
 public:
  ProjectionSingular(const std::string& msg, double cond) : Error(msg), condition(cond) {}
  double condition;
};

// Seeded source of Wiener increments.
class NoisePath {
 public:
  explicit NoisePath(std::uint64_t seed) : seed_(seed), rng_(seed) {}
  std::uint64_t seed() const { return seed_; }
  double normal() { return normal_(rng_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

// Heterodyne: ΔW = (ξ₁ + iξ₂)√(dt/2). Homodyne: ΔY = ξ√dt (real).
std::vector<cplx> wiener(NoisePath& noise, const std::vector<Unraveling>& kinds, double dt);

enum class CoordinateMode { GradientFlow, Fiducial, GibbsProjection, FixedBasis };

struct DynamicsOptions {
  CoordinateMode mode = CoordinateMode::GradientFlow;
  // Negative selects 10× the largest decay rate.
  double eta = -1.0;
  PenaltyFunctional functional = PenaltyFunctional::number(0);
  // Weights of the reference Gibbs state (fiducial Ω, initial Gibbs weights).
  // Empty or +∞ entries select the ground state.
  RVec reference_beta;
};

struct CoupledState {
  QuantumState sigma;
  RVec theta;
  RVec beta;
  double t = 0.0;
  double norm_defect = 0.0;  // |‖·‖²/‖·‖²_prev − 1| of the last step before renormalization
};

// Transformed model operators at one point, split into identity-free matrix
// parts and scalar parts.
struct FrameOperators {
  RVec theta;
  CMat H;
  std::vector<CMat> L;
  std::vector<cplx> L0;
  std::vector<CMat> drift;  // L†L (+ L² for homodyne), identity-free
  std::vector<CMat> c;      // full unobserved operators
  std::vector<CMat> F;      // identity-free right generators
  std::vector<std::vector<CMat>> dF;
};

FrameOperators frame_operators(const ModelSpec& model, const ManifoldSpec& spec, const RVec& theta,
                               MatrixCache& cache);

// Identity-free dG of the SSE at the given frame; `sigma` fixes ⟨L⟩ in dM.
CMat sse_generator(const FrameOperators& fo, const ModelSpec& model, const QuantumState& sigma,
                   const std::vector<cplx>& dW, double dt);
// Full dG in the fixed frame, including identity components.
CMat sse_generator(const ModelSpec& model, const QuantumState& psi, const std::vector<cplx>& dW, double dt);
// dK = dG_θ − Σ_j F_j dθ^j
CMat moving_generator(const CMat& dG_theta, const std::vector<CMat>& F, const RVec& dtheta);
// dq_j = 2 Im⟪dG, X_j⟫ − Σ_l Re⟨[c_l†, X_j] c_l⟩ dt for the operators X_j.
RVec bias_flow(const QuantumState& state, const CMat& dG, const std::vector<CMat>& X, const std::vector<CMat>& c,
               double dt);

struct CoordinateIncrement {
  RVec dtheta;
  RVec dbeta;
  bool frozen = false;
};

// GradientFlow / Fiducial: dθ = (h + 1e-10)⁻¹(dq − η y dt), frozen when min eig(h) < 1e-8.
CoordinateIncrement coordinate_increment(const RMat& h, const RVec& y, const RVec& dq, double eta, double dt);
// GibbsProjection: [[h, y_kjᵀ], [y_kj, g]] (dθ, dβ) = (dq, dm).
CoordinateIncrement gibbs_projection_increment(const RMat& h, const RMat& y_kj, const RMat& g, const RVec& dq,
                                               const RVec& dm);

struct Increment {
  CVec dvec;  // pure states
  CMat drho;  // mixed states
  RVec dtheta;
  RVec dbeta;
  CMat dG;  // identity-free
  CMat dK;
  RVec dq;
  RVec y;
  RMat h;
  bool frozen = false;
};

// Evaluates the coupled increments and advances them with Heun's
// predictor-corrector scheme (Stratonovich).
class Integrator {
 public:
  Integrator(ModelSpec model, ManifoldSpec spec, DynamicsOptions opts);

  Increment increment(const CoupledState& s, const std::vector<cplx>& dW, double dt);
  CoupledState step(const CoupledState& s, const std::vector<cplx>& dW, double dt);
  CoupledState step(const CoupledState& s, NoisePath& noise, double dt);
  // Deterministic step (all noise increments zero).
  CoupledState step(const CoupledState& s, double dt);

  const ModelSpec& model() const { return model_; }
  const ManifoldSpec& spec() const { return spec_; }
  const DynamicsOptions& options() const { return opts_; }
  double eta() const { return eta_; }
  int frozen_steps() const { return frozen_steps_; }
  MatrixCache& cache() { return cache_; }
  const FrameOperators& frame(const RVec& theta);
  // Moving-frame Gibbs state χ_β for the functional's penalties.
  QuantumState reference_state(const RVec& beta) const;
  // ⟨op⟩ in the fixed frame, evaluated as ⟨U†opU⟩_σ.
  cplx fixed_frame_expect(const OpPoly& op, const CoupledState& s);

 private:
  ModelSpec model_;
  ManifoldSpec spec_;
  DynamicsOptions opts_;
  double eta_;
  MatrixCache cache_;
  RVec m_;  // functional diagonal
  std::optional<FrameOperators> last_;
  int frozen_steps_ = 0;
};

// One Heun step of the moving-frame master equation with prescribed dθ.
QuantumState master_step(const QuantumState& sigma, const ModelSpec& model, const ManifoldSpec& spec,
                         const RVec& theta, const RVec& dtheta, double dt, const std::vector<cplx>& dW,
                         bool check_positivity = true);

// Lower bound min{−Re λ} over the spectrum of the deterministic coordinate-drift
// Jacobian (fiducial ground-state dynamics), by central differences.
double estimate_eta(const ModelSpec& model, const ManifoldSpec& spec, const PenaltyFunctional& functional,
                    const RVec& theta, double h = 1e-5);

}  // namespace qmb
