#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qmb/hilbert.hpp"

namespace qmb {

// Generating letters: bosonic a, a† or spin J_z, J_+, J_-.
enum class Gen : unsigned char { A, Ad, Jz, Jp, Jm };

struct Letter {
  int sub = 0;
  Gen gen = Gen::A;
  bool operator==(const Letter&) const = default;
  auto operator<=>(const Letter&) const = default;
};

struct Monomial {
  cplx coeff;
  std::vector<Letter> word;  // product read left to right; empty word is the identity
};

class UnsupportedOperator : public Error {
 public:
  using Error::Error;
};

// Non-commutative polynomial in the generating letters. Letters on different
// subsystems are reordered freely; order within a subsystem is kept.
class OpPoly {
 public:
  OpPoly() = default;
  static OpPoly scalar(cplx c);
  static OpPoly letter(int sub, Gen g, cplx c = 1.0);

  const std::vector<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // Coefficient of the identity word.
  cplx scalar_part() const;

  OpPoly operator+(const OpPoly& o) const;
  OpPoly operator-(const OpPoly& o) const;
  OpPoly operator*(const OpPoly& o) const;
  OpPoly operator*(cplx s) const;
  OpPoly operator-() const { return *this * cplx(-1.0); }
  OpPoly& operator+=(const OpPoly& o);
  OpPoly adjoint() const;
  OpPoly pow(int k) const;

  // Replace every letter by the polynomial returned from the map.
  OpPoly substitute(const std::function<OpPoly(const Letter&)>& image) const;

  // Largest subsystem index referenced, or −1.
  int max_sub() const;
  CMat matrix(const Dims& dims) const;
  std::string to_string() const;

 private:
  void simplify();
  std::vector<Monomial> terms_;
};

OpPoly operator*(cplx s, const OpPoly& p);

namespace ops {
OpPoly a(int sub = 0);
OpPoly ad(int sub = 0);
OpPoly n(int sub = 0);
OpPoly q(int sub = 0);
OpPoly p(int sub = 0);
OpPoly s(int sub = 0);
OpPoly jz(int sub = 0);
OpPoly jp(int sub = 0);
OpPoly jm(int sub = 0);
OpPoly jx(int sub = 0);
OpPoly jy(int sub = 0);
OpPoly id();
}  // namespace ops

// Matrix of a single letter on its own subsystem.
CMat letter_matrix(Gen g, int dim);

// Memoizes the matrix of every word seen; not thread-safe, one per trajectory.
class MatrixCache {
 public:
  explicit MatrixCache(Dims dims) : dims_(std::move(dims)) {}
  const Dims& dims() const { return dims_; }
  CMat matrix(const OpPoly& p);
  // Matrix of p with its identity component removed.
  CMat matrix_without_scalar(const OpPoly& p);

 private:
  const CMat& word(const std::vector<Letter>& w);
  Dims dims_;
  std::map<std::vector<Letter>, CMat> words_;
};

}  // namespace qmb
