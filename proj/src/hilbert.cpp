#include "qmb/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

namespace qmb {

int total_dim(const Dims& dims) {
  if (dims.empty()) throw InvalidDimension("empty dims");
  long prod = 1;
  for (int d : dims) {
    if (d < 1) throw InvalidDimension("subsystem dimension must be positive");
    prod *= d;
  }
  return static_cast<int>(prod);
}

Operator::Operator(CMat m, Dims dims) : m_(std::move(m)), dims_(std::move(dims)) {
  if (m_.rows() != m_.cols()) throw InvalidDimension("operator matrix must be square");
  if (m_.rows() != total_dim(dims_)) throw InvalidDimension("operator side does not match dims");
}

bool Operator::is_hermitian(double tol) const {
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

void Operator::assert_hermitian(double tol) const {
  if (!is_hermitian(tol)) throw ValidityError("operator is not Hermitian");
}

Operator Operator::adjoint() const { return Operator(m_.adjoint(), dims_); }

static void require_same_dims(const Dims& a, const Dims& b) {
  if (a != b) throw DimensionMismatch("operand dims differ");
}

Operator Operator::operator+(const Operator& o) const {
  require_same_dims(dims_, o.dims_);
  return Operator(m_ + o.m_, dims_);
}
Operator Operator::operator-(const Operator& o) const {
  require_same_dims(dims_, o.dims_);
  return Operator(m_ - o.m_, dims_);
}
Operator Operator::operator*(const Operator& o) const {
  require_same_dims(dims_, o.dims_);
  return Operator(m_ * o.m_, dims_);
}
Operator Operator::operator*(cplx s) const { return Operator(m_ * s, dims_); }
Operator operator*(cplx s, const Operator& op) { return op * s; }

Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }
CMat commutator(const CMat& a, const CMat& b) { return a * b - b * a; }

QuantumState::QuantumState(std::variant<CVec, CMat> d, Dims dims)
    : data_(std::move(d)), dims_(std::move(dims)) {}

QuantumState QuantumState::pure(CVec v, Dims dims) {
  if (v.size() != total_dim(dims)) throw DimensionMismatch("state vector size does not match dims");
  return QuantumState(std::move(v), std::move(dims));
}

QuantumState QuantumState::mixed(CMat rho, Dims dims) {
  if (rho.rows() != rho.cols() || rho.rows() != total_dim(dims))
    throw InvalidDimension("density matrix size does not match dims");
  return QuantumState(std::move(rho), std::move(dims));
}

const CVec& QuantumState::vec() const {
  if (!is_pure()) throw InvalidArgument("state is mixed");
  return std::get<CVec>(data_);
}

const CMat& QuantumState::rho() const {
  if (is_pure()) throw InvalidArgument("state is pure");
  return std::get<CMat>(data_);
}

CMat QuantumState::density() const {
  if (is_pure()) {
    const CVec& v = vec();
    return v * v.adjoint();
  }
  return rho();
}

int QuantumState::size() const { return total_dim(dims_); }

double QuantumState::weight() const {
  if (is_pure()) return vec().squaredNorm();
  return rho().trace().real();
}

QuantumState QuantumState::normalized() const {
  double w = weight();
  if (!(w > 0.0) || !std::isfinite(w)) throw ValidityError("state has zero or non-finite weight");
  if (is_pure()) return QuantumState(CVec(vec() / std::sqrt(w)), dims_);
  return QuantumState(CMat(rho() / w), dims_);
}

cplx QuantumState::expect(const CMat& op) const {
  if (is_pure()) {
    const CVec& v = vec();
    return v.dot(op * v) / v.squaredNorm();
  }
  const CMat& r = rho();
  return (r * op).trace() / r.trace().real();
}

RVec QuantumState::populations() const {
  if (is_pure()) return vec().cwiseAbs2() / vec().squaredNorm();
  return rho().diagonal().real() / rho().trace().real();
}

void QuantumState::validate() const {
  if (is_pure()) {
    if (!vec().allFinite()) throw ValidityError("state vector has non-finite entries");
    return;
  }
  const CMat& r = rho();
  if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ValidityError("density matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(r, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) throw ValidityError("density matrix has negative eigenvalues");
}

Operator annihilation(int dim) {
  if (dim < 2) throw InvalidDimension("annihilation operator needs dim >= 2");
  CMat a = CMat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return Operator(a, {dim});
}

Operator creation(int dim) { return annihilation(dim).adjoint(); }

Operator number(int dim) {
  if (dim < 1) throw InvalidDimension("number operator needs dim >= 1");
  CMat n = CMat::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = k;
  return Operator(n, {dim});
}

Operator position(int dim) {
  CMat a = annihilation(dim).mat();
  return Operator((a + a.adjoint()) / std::sqrt(2.0), {dim});
}

Operator momentum(int dim) {
  CMat a = annihilation(dim).mat();
  return Operator((a - a.adjoint()) / (std::sqrt(2.0) * I), {dim});
}

Operator squeeze_generator(int dim) {
  CMat a = annihilation(dim).mat();
  CMat a2 = a * a;
  return Operator((a2 - a2.adjoint()) / (2.0 * I), {dim});
}

Operator identity(const Dims& dims) {
  int n = total_dim(dims);
  return Operator(CMat::Identity(n, n), dims);
}

Operator AngularMomentum::jx() const { return (jplus + jminus) * cplx(0.5); }
Operator AngularMomentum::jy() const { return (jplus - jminus) * (1.0 / (2.0 * I)); }

AngularMomentum angular_momentum(double J) {
  double twoJ = 2.0 * J;
  if (J < 0 || std::abs(twoJ - std::round(twoJ)) > 1e-12)
    throw InvalidArgument("J must be a non-negative half-integer");
  int dim = static_cast<int>(std::lround(twoJ)) + 1;
  CMat jz = CMat::Zero(dim, dim);
  CMat jp = CMat::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    double m = -J + i;
    jz(i, i) = m;
    if (i + 1 < dim) jp(i + 1, i) = std::sqrt(J * (J + 1) - m * (m + 1));
  }
  Dims d{dim};
  return {Operator(jz, d), Operator(jp, d), Operator(CMat(jp.adjoint()), d)};
}

double spin_from_dim(int dim) { return 0.5 * (dim - 1); }

CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMat embed(const CMat& local, const Dims& dims, int sub) {
  if (sub < 0 || sub >= static_cast<int>(dims.size())) throw InvalidArgument("subsystem index out of range");
  if (local.rows() != dims[sub]) throw DimensionMismatch("local operator size does not match subsystem");
  if (dims.size() == 1) return local;
  int left = 1, right = 1;
  for (int k = 0; k < sub; ++k) left *= dims[k];
  for (size_t k = sub + 1; k < dims.size(); ++k) right *= dims[k];
  CMat out = local;
  if (right > 1) out = kron(out, CMat::Identity(right, right));
  if (left > 1) out = kron(CMat::Identity(left, left), out);
  return out;
}

Operator embed(const Operator& local, const Dims& dims, int sub) {
  return Operator(embed(local.mat(), dims, sub), dims);
}

std::vector<int> unflatten(int index, const Dims& dims) {
  std::vector<int> levels(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    levels[k] = index % dims[k];
    index /= dims[k];
  }
  return levels;
}

int flatten(const std::vector<int>& levels, const Dims& dims) {
  int idx = 0;
  for (size_t k = 0; k < dims.size(); ++k) idx = idx * dims[k] + levels[k];
  return idx;
}

QuantumState fock_state(const Dims& dims, const std::vector<int>& levels) {
  if (levels.size() != dims.size()) throw DimensionMismatch("level count does not match dims");
  for (size_t k = 0; k < dims.size(); ++k)
    if (levels[k] < 0 || levels[k] >= dims[k]) throw InvalidArgument("Fock level outside truncation");
  CVec v = CVec::Zero(total_dim(dims));
  v(flatten(levels, dims)) = 1.0;
  return QuantumState::pure(v, dims);
}

QuantumState fock_state(int dim, int n) { return fock_state(Dims{dim}, {n}); }

QuantumState coherent_state(int dim, cplx alpha) {
  CVec v(dim);
  cplx c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < dim; ++n) {
    v(n) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  return QuantumState::pure(v, {dim});
}

QuantumState thermal_state(int dim, double nbar) {
  if (nbar < 0) throw InvalidArgument("thermal occupation must be non-negative");
  CMat rho = CMat::Zero(dim, dim);
  if (nbar == 0.0) {
    rho(0, 0) = 1.0;
    return QuantumState::mixed(rho, {dim});
  }
  double x = nbar / (nbar + 1.0);
  double p = 1.0 / (nbar + 1.0);
  for (int n = 0; n < dim; ++n) {
    rho(n, n) = p;
    p *= x;
  }
  return QuantumState::mixed(rho, {dim});
}

QuantumState cat_state(int dim, cplx alpha, bool even) {
  CVec v = coherent_state(dim, alpha).vec() + (even ? 1.0 : -1.0) * coherent_state(dim, -alpha).vec();
  return QuantumState::pure(v.normalized(), {dim});
}

QuantumState product_state(const std::vector<QuantumState>& factors) {
  if (factors.empty()) throw InvalidArgument("empty product");
  Dims dims;
  bool all_pure = true;
  for (const auto& f : factors) {
    if (f.dims().size() != 1) throw InvalidArgument("product factors must be single-subsystem");
    dims.push_back(f.dims()[0]);
    all_pure = all_pure && f.is_pure();
  }
  if (all_pure) {
    CVec v = factors[0].vec();
    for (size_t k = 1; k < factors.size(); ++k) v = kron(v, factors[k].vec());
    return QuantumState::pure(v, dims);
  }
  CMat r = factors[0].density();
  for (size_t k = 1; k < factors.size(); ++k) r = kron(r, factors[k].density());
  return QuantumState::mixed(r, dims);
}

static CVec random_supported_vector(const Dims& dims, int support, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  int n = total_dim(dims);
  CVec v = CVec::Zero(n);
  for (int i = 0; i < n; ++i) {
    auto lv = unflatten(i, dims);
    bool inside = std::all_of(lv.begin(), lv.end(), [&](int l) { return l < support; });
    if (inside) v(i) = cplx(g(rng), g(rng));
  }
  return v.normalized();
}

QuantumState random_pure(const Dims& dims, int support, std::mt19937_64& rng) {
  return QuantumState::pure(random_supported_vector(dims, support, rng), dims);
}

QuantumState random_mixed(const Dims& dims, int support, int rank, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  int n = total_dim(dims);
  CMat rho = CMat::Zero(n, n);
  double total = 0;
  for (int r = 0; r < rank; ++r) {
    CVec v = random_supported_vector(dims, support, rng);
    double w = u(rng);
    rho += w * v * v.adjoint();
    total += w;
  }
  rho /= total;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return QuantumState::mixed(rho, dims);
}

cplx qcor(const CMat& a, const CMat& b, const QuantumState& state) {
  if (a.rows() != state.size() || b.rows() != state.size()) throw DimensionMismatch("qcor operand size");
  return state.expect(a.adjoint() * b) - std::conj(state.expect(a)) * state.expect(b);
}

cplx qcor(const Operator& a, const Operator& b, const QuantumState& state) {
  if (a.dims() != state.dims() || b.dims() != state.dims()) throw DimensionMismatch("qcor operand dims");
  return qcor(a.mat(), b.mat(), state);
}

double von_neumann_entropy(const QuantumState& state) {
  if (state.is_pure()) return 0.0;
  QuantumState s = state.normalized();
  Eigen::SelfAdjointEigenSolver<CMat> es(s.rho(), Eigen::EigenvaluesOnly);
  const RVec& ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-10) throw ValidityError("density matrix has negative eigenvalues");
  double h = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-14) h -= ev(i) * std::log(ev(i));
  return std::max(h, 0.0);
}

CMat partial_trace_keep(const QuantumState& state, int subsystem) {
  const Dims& dims = state.dims();
  if (subsystem < 0 || subsystem >= static_cast<int>(dims.size()))
    throw InvalidArgument("subsystem index out of range");
  QuantumState s = state.normalized();
  int d = dims[subsystem];
  if (dims.size() == 1) return s.density();
  int left = 1, right = 1;
  for (int k = 0; k < subsystem; ++k) left *= dims[k];
  for (size_t k = subsystem + 1; k < dims.size(); ++k) right *= dims[k];
  CMat out = CMat::Zero(d, d);
  if (s.is_pure()) {
    // Reshape ψ as (left, d, right) and contract the outer indices.
    const CVec& v = s.vec();
    for (int l = 0; l < left; ++l)
      for (int r = 0; r < right; ++r)
        for (int i = 0; i < d; ++i) {
          cplx vi = v((l * d + i) * right + r);
          if (vi == cplx(0)) continue;
          for (int j = 0; j < d; ++j) out(i, j) += vi * std::conj(v((l * d + j) * right + r));
        }
    return out;
  }
  const CMat& rho = s.rho();
  for (int l = 0; l < left; ++l)
    for (int r = 0; r < right; ++r)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i, j) += rho((l * d + i) * right + r, (l * d + j) * right + r);
  return out;
}

RVec occupation_probabilities(const QuantumState& state, int subsystem) {
  const Dims& dims = state.dims();
  if (subsystem < 0 || subsystem >= static_cast<int>(dims.size()))
    throw InvalidArgument("subsystem index out of range");
  RVec pop = state.populations();
  RVec out = RVec::Zero(dims[subsystem]);
  for (Eigen::Index i = 0; i < pop.size(); ++i) out(unflatten(static_cast<int>(i), dims)[subsystem]) += pop(i);
  return out;
}

static double gen_laguerre(int n, double alpha, double x) {
  if (n == 0) return 1.0;
  double l0 = 1.0, l1 = 1.0 + alpha - x;
  for (int k = 1; k < n; ++k) {
    double l2 = ((2 * k + 1 + alpha - x) * l1 - (k + alpha) * l0) / (k + 1);
    l0 = l1;
    l1 = l2;
  }
  return l1;
}

RMat wigner_grid(const QuantumState& state, const RVec& q, const RVec& p) {
  if (state.dims().size() != 1) throw InvalidArgument("Wigner grid needs a single-mode state");
  CMat rho = state.normalized().density();
  const int M = static_cast<int>(rho.rows());
  RMat w = RMat::Zero(p.size(), q.size());
  for (Eigen::Index ip = 0; ip < p.size(); ++ip) {
    for (Eigen::Index iq = 0; iq < q.size(); ++iq) {
      cplx A = cplx(q(iq), p(ip)) / std::sqrt(2.0);
      double B = 4.0 * std::norm(A);
      double acc = 0.0;
      for (int m = 0; m < M; ++m) {
        double sign = (m % 2 == 0) ? 1.0 : -1.0;
        if (std::abs(rho(m, m)) > 0) acc += sign * rho(m, m).real() * gen_laguerre(m, 0.0, B);
        for (int n = m + 1; n < M; ++n) {
          if (std::abs(rho(m, n)) == 0.0) continue;
          double lfac = 0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0));
          cplx term = rho(m, n) * sign * std::pow(2.0 * A, n - m) * std::exp(lfac) *
                      gen_laguerre(m, static_cast<double>(n - m), B);
          acc += 2.0 * term.real();
        }
      }
      w(ip, iq) = acc * std::exp(-B / 2.0) / M_PI;
    }
  }
  return w;
}

RMat wigner_grid(const QuantumState& state, double q_min, double q_max, double p_min, double p_max,
                 int resolution) {
  if (resolution < 2) throw InvalidArgument("Wigner resolution must be >= 2");
  return wigner_grid(state, RVec::LinSpaced(resolution, q_min, q_max), RVec::LinSpaced(resolution, p_min, p_max));
}

double fidelity(const QuantumState& a, const QuantumState& b) {
  if (a.dims() != b.dims()) throw DimensionMismatch("fidelity dims");
  if (a.is_pure() && b.is_pure()) {
    return std::norm(a.vec().dot(b.vec())) / (a.vec().squaredNorm() * b.vec().squaredNorm());
  }
  if (a.is_pure()) return b.expect(a.density()).real() / a.weight();
  if (b.is_pure()) return a.expect(b.density()).real() / b.weight();
  // Uhlmann fidelity (Tr√(√ρ σ √ρ))².
  Eigen::SelfAdjointEigenSolver<CMat> es(a.normalized().rho());
  RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  CMat sq = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  CMat inner = sq * b.normalized().rho() * sq;
  Eigen::SelfAdjointEigenSolver<CMat> es2(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  double t = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return t * t;
}

double fubini_study(const CVec& a, const CVec& b) {
  double ov = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::min(1.0, ov));
}

double trace_distance(const QuantumState& a, const QuantumState& b) {
  CMat d = a.normalized().density() - b.normalized().density();
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<int> interior_indices(const Dims& dims, int exclude_top) {
  std::vector<int> out;
  int n = total_dim(dims);
  for (int i = 0; i < n; ++i) {
    auto lv = unflatten(i, dims);
    bool ok = true;
    for (size_t k = 0; k < dims.size(); ++k) ok = ok && lv[k] < dims[k] - exclude_top;
    if (ok) out.push_back(i);
  }
  return out;
}

CMat interior_block(const CMat& m, const Dims& dims, int exclude_top) {
  auto idx = interior_indices(dims, exclude_top);
  CMat out(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = 0; j < idx.size(); ++j) out(i, j) = m(idx[i], idx[j]);
  return out;
}

double interior_max_diff(const CMat& a, const CMat& b, const Dims& dims, int exclude_top) {
  CMat d = interior_block(a - b, dims, exclude_top);
  return d.size() == 0 ? 0.0 : d.cwiseAbs().maxCoeff();
}

CMat expm_hermitian(const CMat& h, double t) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (h + h.adjoint()));
  CVec ph = (es.eigenvalues().cast<cplx>() * (-I * t)).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

CMat expm_general(const CMat& a) {
  CMat out = a.exp();
  if (!out.allFinite()) throw NumericError("matrix exponential did not converge");
  return out;
}

}  // namespace qmb
