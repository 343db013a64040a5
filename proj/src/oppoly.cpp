#include "qmb/oppoly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace qmb {

namespace {

bool is_spin(Gen g) { return g == Gen::Jz || g == Gen::Jp || g == Gen::Jm; }

Gen dagger(Gen g) {
  switch (g) {
    case Gen::A: return Gen::Ad;
    case Gen::Ad: return Gen::A;
    case Gen::Jp: return Gen::Jm;
    case Gen::Jm: return Gen::Jp;
    default: return g;
  }
}

}  // namespace

CMat letter_matrix(Gen g, int dim) {
  switch (g) {
    case Gen::A: return annihilation(dim).mat();
    case Gen::Ad: return creation(dim).mat();
    default: break;
  }
  AngularMomentum j = angular_momentum(spin_from_dim(dim));
  if (g == Gen::Jz) return j.jz.mat();
  if (g == Gen::Jp) return j.jplus.mat();
  return j.jminus.mat();
}

OpPoly OpPoly::scalar(cplx c) {
  OpPoly p;
  if (c != cplx(0)) p.terms_.push_back({c, {}});
  return p;
}

OpPoly OpPoly::letter(int sub, Gen g, cplx c) {
  if (sub < 0) throw InvalidArgument("negative subsystem index");
  OpPoly p;
  p.terms_.push_back({c, {Letter{sub, g}}});
  return p;
}

cplx OpPoly::scalar_part() const {
  for (const auto& t : terms_)
    if (t.word.empty()) return t.coeff;
  return 0.0;
}

void OpPoly::simplify() {
  std::map<std::vector<Letter>, cplx> acc;
  for (auto& t : terms_) {
    std::stable_sort(t.word.begin(), t.word.end(), [](const Letter& x, const Letter& y) { return x.sub < y.sub; });
    acc[t.word] += t.coeff;
  }
  terms_.clear();
  for (auto& [w, c] : acc)
    if (std::abs(c) > 1e-300) terms_.push_back({c, w});
}

OpPoly OpPoly::operator+(const OpPoly& o) const {
  OpPoly r = *this;
  r += o;
  return r;
}

OpPoly& OpPoly::operator+=(const OpPoly& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  simplify();
  return *this;
}

OpPoly OpPoly::operator-(const OpPoly& o) const { return *this + o * cplx(-1.0); }

OpPoly OpPoly::operator*(const OpPoly& o) const {
  OpPoly r;
  r.terms_.reserve(terms_.size() * o.terms_.size());
  for (const auto& x : terms_)
    for (const auto& y : o.terms_) {
      Monomial m{x.coeff * y.coeff, x.word};
      m.word.insert(m.word.end(), y.word.begin(), y.word.end());
      r.terms_.push_back(std::move(m));
    }
  r.simplify();
  return r;
}

OpPoly OpPoly::operator*(cplx s) const {
  OpPoly r = *this;
  for (auto& t : r.terms_) t.coeff *= s;
  r.simplify();
  return r;
}

OpPoly operator*(cplx s, const OpPoly& p) { return p * s; }

OpPoly OpPoly::adjoint() const {
  OpPoly r;
  for (const auto& t : terms_) {
    Monomial m{std::conj(t.coeff), {}};
    for (auto it = t.word.rbegin(); it != t.word.rend(); ++it) m.word.push_back({it->sub, dagger(it->gen)});
    r.terms_.push_back(std::move(m));
  }
  r.simplify();
  return r;
}

OpPoly OpPoly::pow(int k) const {
  if (k < 0) throw InvalidArgument("negative power");
  OpPoly r = scalar(1.0);
  for (int i = 0; i < k; ++i) r = r * *this;
  return r;
}

OpPoly OpPoly::substitute(const std::function<OpPoly(const Letter&)>& image) const {
  OpPoly r;
  std::map<Letter, OpPoly> cache;
  for (const auto& t : terms_) {
    OpPoly acc = scalar(t.coeff);
    for (const auto& l : t.word) {
      auto it = cache.find(l);
      if (it == cache.end()) it = cache.emplace(l, image(l)).first;
      acc = acc * it->second;
    }
    r.terms_.insert(r.terms_.end(), acc.terms_.begin(), acc.terms_.end());
  }
  r.simplify();
  return r;
}

int OpPoly::max_sub() const {
  int m = -1;
  for (const auto& t : terms_)
    for (const auto& l : t.word) m = std::max(m, l.sub);
  return m;
}

CMat OpPoly::matrix(const Dims& dims) const {
  const int n = total_dim(dims);
  const int nsub = static_cast<int>(dims.size());
  if (max_sub() >= nsub) throw DimensionMismatch("polynomial references a subsystem outside dims");
  std::map<Letter, CMat> letters;
  auto letter_mat = [&](const Letter& l) -> const CMat& {
    auto it = letters.find(l);
    if (it == letters.end()) it = letters.emplace(l, letter_matrix(l.gen, dims[l.sub])).first;
    return it->second;
  };
  CMat out = CMat::Zero(n, n);
  for (const auto& t : terms_) {
    if (t.word.empty()) {
      out.diagonal().array() += t.coeff;
      continue;
    }
    for (const auto& l : t.word)
      if (is_spin(l.gen) && dims[l.sub] < 1) throw InvalidDimension("spin subsystem dimension");
    // Per-subsystem products, then a single Kronecker assembly.
    std::vector<CMat> local(nsub);
    std::vector<bool> used(nsub, false);
    for (const auto& l : t.word) {
      const CMat& lm = letter_mat(l);
      if (!used[l.sub]) {
        local[l.sub] = lm;
        used[l.sub] = true;
      } else {
        local[l.sub] = (local[l.sub] * lm).eval();
      }
    }
    CMat term;
    bool started = false;
    for (int k = 0; k < nsub; ++k) {
      CMat f = used[k] ? local[k] : CMat::Identity(dims[k], dims[k]);
      term = started ? kron(term, f) : f;
      started = true;
    }
    out += t.coeff * term;
  }
  return out;
}

std::string OpPoly::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : terms_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << t.coeff.real() << (t.coeff.imag() < 0 ? "-" : "+") << std::abs(t.coeff.imag()) << "i)";
    for (const auto& l : t.word) {
      static const char* names[] = {"a", "a†", "Jz", "J+", "J-"};
      os << "·" << names[static_cast<int>(l.gen)] << l.sub;
    }
  }
  return os.str();
}

const CMat& MatrixCache::word(const std::vector<Letter>& w) {
  auto it = words_.find(w);
  if (it == words_.end()) {
    OpPoly p = OpPoly::scalar(1.0);
    for (const auto& l : w) p = p * OpPoly::letter(l.sub, l.gen);
    it = words_.emplace(w, p.matrix(dims_)).first;
  }
  return it->second;
}

CMat MatrixCache::matrix(const OpPoly& p) {
  const int n = total_dim(dims_);
  CMat out = CMat::Zero(n, n);
  for (const auto& t : p.terms()) {
    if (t.word.empty())
      out.diagonal().array() += t.coeff;
    else
      out += t.coeff * word(t.word);
  }
  return out;
}

CMat MatrixCache::matrix_without_scalar(const OpPoly& p) {
  const int n = total_dim(dims_);
  CMat out = CMat::Zero(n, n);
  for (const auto& t : p.terms())
    if (!t.word.empty()) out += t.coeff * word(t.word);
  return out;
}

namespace ops {
OpPoly a(int sub) { return OpPoly::letter(sub, Gen::A); }
OpPoly ad(int sub) { return OpPoly::letter(sub, Gen::Ad); }
OpPoly n(int sub) { return ad(sub) * a(sub); }
OpPoly q(int sub) { return (a(sub) + ad(sub)) * cplx(1.0 / std::sqrt(2.0)); }
OpPoly p(int sub) { return (a(sub) - ad(sub)) * (1.0 / (std::sqrt(2.0) * I)); }
OpPoly s(int sub) { return (a(sub) * a(sub) - ad(sub) * ad(sub)) * (1.0 / (2.0 * I)); }
OpPoly jz(int sub) { return OpPoly::letter(sub, Gen::Jz); }
OpPoly jp(int sub) { return OpPoly::letter(sub, Gen::Jp); }
OpPoly jm(int sub) { return OpPoly::letter(sub, Gen::Jm); }
OpPoly jx(int sub) { return (jp(sub) + jm(sub)) * cplx(0.5); }
OpPoly jy(int sub) { return (jp(sub) - jm(sub)) * (1.0 / (2.0 * I)); }
OpPoly id() { return OpPoly::scalar(1.0); }
}  // namespace ops

}  // namespace qmb
