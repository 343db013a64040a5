#pragma once

#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qmb {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Dims = std::vector<int>;

inline constexpr cplx I{0.0, 1.0};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InvalidDimension : public Error {
 public:
  using Error::Error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class ValidityError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};

int total_dim(const Dims& dims);

// Dense operator on a truncated product space.
class Operator {
 public:
  Operator(CMat m, Dims dims);

  const CMat& mat() const { return m_; }
  const Dims& dims() const { return dims_; }
  int size() const { return static_cast<int>(m_.rows()); }

  bool is_hermitian(double tol = 1e-12) const;
  void assert_hermitian(double tol = 1e-12) const;
  Operator adjoint() const;

  Operator operator+(const Operator& o) const;
  Operator operator-(const Operator& o) const;
  Operator operator*(const Operator& o) const;
  Operator operator*(cplx s) const;

 private:
  CMat m_;
  Dims dims_;
};

Operator operator*(cplx s, const Operator& op);
Operator commutator(const Operator& a, const Operator& b);
CMat commutator(const CMat& a, const CMat& b);

// Pure (vector) or mixed (density matrix) state; pure vectors may be unnormalized.
class QuantumState {
 public:
  static QuantumState pure(CVec v, Dims dims);
  static QuantumState mixed(CMat rho, Dims dims);

  bool is_pure() const { return std::holds_alternative<CVec>(data_); }
  const CVec& vec() const;
  const CMat& rho() const;
  CMat density() const;
  const Dims& dims() const { return dims_; }
  int size() const;

  // ‖ψ‖² for pure, Tr ρ for mixed.
  double weight() const;
  QuantumState normalized() const;
  // Normalized expectation value.
  cplx expect(const CMat& op) const;
  // Diagonal of the normalized density matrix.
  RVec populations() const;
  void validate() const;

 private:
  QuantumState(std::variant<CVec, CMat> d, Dims dims);
  std::variant<CVec, CMat> data_;
  Dims dims_;
};

Operator annihilation(int dim);
Operator creation(int dim);
Operator number(int dim);
// q = (a + a†)/√2, p = (a − a†)/(√2 i)
Operator position(int dim);
Operator momentum(int dim);
// s = (a² − a†²)/(2i)
Operator squeeze_generator(int dim);
Operator identity(const Dims& dims);

struct AngularMomentum {
  Operator jz;
  Operator jplus;
  Operator jminus;
  Operator jx() const;
  Operator jy() const;
};
// Basis ordered m = −J, …, J.
AngularMomentum angular_momentum(double J);
double spin_from_dim(int dim);

CMat kron(const CMat& a, const CMat& b);
// Embed a single-subsystem matrix into the product space.
CMat embed(const CMat& local, const Dims& dims, int sub);
Operator embed(const Operator& local, const Dims& dims, int sub);

QuantumState fock_state(const Dims& dims, const std::vector<int>& levels);
QuantumState fock_state(int dim, int n);
// Truncated coherent-state series e^{−|α|²/2} Σ αⁿ/√n! |n⟩, not renormalized.
QuantumState coherent_state(int dim, cplx alpha);
QuantumState thermal_state(int dim, double nbar);
QuantumState cat_state(int dim, cplx alpha, bool even = true);
QuantumState product_state(const std::vector<QuantumState>& factors);
QuantumState random_pure(const Dims& dims, int support, std::mt19937_64& rng);
QuantumState random_mixed(const Dims& dims, int support, int rank, std::mt19937_64& rng);

cplx qcor(const Operator& a, const Operator& b, const QuantumState& state);
cplx qcor(const CMat& a, const CMat& b, const QuantumState& state);
double von_neumann_entropy(const QuantumState& state);
RVec occupation_probabilities(const QuantumState& state, int subsystem);
CMat partial_trace_keep(const QuantumState& state, int subsystem);

// Wigner function on the grid (q_i, p_j); rows index p, columns index q.
RMat wigner_grid(const QuantumState& state, const RVec& q, const RVec& p);
RMat wigner_grid(const QuantumState& state, double q_min, double q_max, double p_min, double p_max,
                 int resolution);

double fidelity(const QuantumState& a, const QuantumState& b);
double fubini_study(const CVec& a, const CVec& b);
double trace_distance(const QuantumState& a, const QuantumState& b);

// Basis indices whose per-subsystem level stays below dims[k] − exclude_top.
std::vector<int> interior_indices(const Dims& dims, int exclude_top);
CMat interior_block(const CMat& m, const Dims& dims, int exclude_top);
double interior_max_diff(const CMat& a, const CMat& b, const Dims& dims, int exclude_top = 2);

// Multi-index ↔ flat index, first subsystem most significant.
std::vector<int> unflatten(int index, const Dims& dims);
int flatten(const std::vector<int>& levels, const Dims& dims);

// exp(−i t H) for Hermitian H.
CMat expm_hermitian(const CMat& h, double t);
CMat expm_general(const CMat& a);

}  // namespace qmb
