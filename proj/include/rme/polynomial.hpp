#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rme {

using VarId = std::uint16_t;

// Variables are laid out as w_1..w_n (ids 0..n-1) followed by mu_1..mu_d.
// A monomial is the sorted multiset of its variable ids; ordering is graded
// lexicographic with lower ids ranking first.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<VarId> vars);
  static Monomial variable(VarId v) { return Monomial(std::vector<VarId>{v}); }

  int degree() const { return static_cast<int>(vars_.size()); }
  const std::vector<VarId>& vars() const { return vars_; }
  bool is_one() const { return vars_.empty(); }

  Monomial operator*(const Monomial& o) const;

  friend bool operator==(const Monomial&, const Monomial&) = default;
  friend std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) {
    if (a.degree() != b.degree()) return a.degree() <=> b.degree();
    return a.vars_ <=> b.vars_;
  }

  std::string to_string(int n_w) const;  // "1", "w1*w3*mu2^2"

 private:
  std::vector<VarId> vars_;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const noexcept;
};

// Booleanity rewrite: every w exponent >= 1 becomes 1.
Monomial reduce_monomial(const Monomial& m, int n_w);

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(double c);  // NOLINT: constants convert implicitly
  static Polynomial variable(VarId v);
  static Polynomial monomial(const Monomial& m, double c = 1.0);

  const std::map<Monomial, double>& terms() const { return terms_; }
  void add_term(const Monomial& m, double c);
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  Polynomial reduced(int n_w) const;
  // values: w then mu
  double evaluate(const Eigen::VectorXd& values) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double c);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
  friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

 private:
  std::map<Monomial, double> terms_;
};

}  // namespace rme
