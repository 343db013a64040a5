#pragma once

#include <vector>

#include "qmb/hilbert.hpp"
#include "qmb/oppoly.hpp"

namespace qmb {

enum class FactorKind { CoherentDisplacement, DisplacedSqueezed, SpinCoherent };

struct ManifoldFactor {
  FactorKind kind;
  int sub;
};

class TruncationWarning : public Error {
 public:
  using Error::Error;
};

// Product of single-subsystem transformation families. Coordinates are laid
// out factor by factor: displacement (Q, P), squeezing (Q, R), spin (θ¹, θ²).
class ManifoldSpec {
 public:
  ManifoldSpec() = default;
  static ManifoldSpec coherent_displacement(int sub = 0);
  static ManifoldSpec displaced_squeezed(int sub = 0);
  static ManifoldSpec spin_coherent(int sub = 0);
  static ManifoldSpec product(const std::vector<ManifoldSpec>& parts);

  const std::vector<ManifoldFactor>& factors() const { return factors_; }
  int n_coords() const { return 2 * static_cast<int>(factors_.size()); }
  bool empty() const { return factors_.empty(); }
  // Index of the factor acting on `sub`, or −1.
  int factor_on(int sub) const;
  void check_dims(const Dims& dims) const;
  void check_point(const RVec& theta) const;

 private:
  std::vector<ManifoldFactor> factors_;
};

// F_j = i U† ∂U/∂θ^j as polynomials in the generating letters.
std::vector<OpPoly> right_generator_polys(const ManifoldSpec& spec, const RVec& theta);
std::vector<CMat> right_generators(const ManifoldSpec& spec, const RVec& theta, const Dims& dims);
// d[j][k] = ∂F_k/∂θ^j.
std::vector<std::vector<OpPoly>> generator_derivative_polys(const ManifoldSpec& spec, const RVec& theta);

// U† X U for a single letter X.
OpPoly adjoint_image(const ManifoldSpec& spec, const RVec& theta, const Letter& letter);
// U† op U by substitution of the letter images.
OpPoly adjoint_action(const ManifoldSpec& spec, const RVec& theta, const OpPoly& op);

CMat unitary(const ManifoldSpec& spec, const RVec& theta, const Dims& dims);

enum class Direction { Forward, Inverse };

struct ApplyOptions {
  double leakage_threshold = 1e-6;
  bool check_leakage = true;
  bool renormalize = false;
};

struct ApplyResult {
  QuantumState state;
  // Population in the top two levels of each transformed bosonic subsystem.
  double edge_weight;
};

// Forward maps φ → Uφ (ρ → UρU†); inverse maps ψ → U†ψ.
ApplyResult apply(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state, Direction dir,
                  const ApplyOptions& opts = {});
QuantumState to_moving_frame(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state);
QuantumState to_fixed_frame(const ManifoldSpec& spec, const RVec& theta, const QuantumState& state);

// Population in the top `levels` levels of each listed subsystem.
double edge_population(const QuantumState& state, const std::vector<int>& subs, int levels = 2);

}  // namespace qmb
