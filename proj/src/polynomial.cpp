#include "rme/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rme {

Monomial::Monomial(std::vector<VarId> vars) : vars_(std::move(vars)) {
  std::sort(vars_.begin(), vars_.end());
}

Monomial Monomial::operator*(const Monomial& o) const {
  Monomial m;
  m.vars_.reserve(vars_.size() + o.vars_.size());
  std::merge(vars_.begin(), vars_.end(), o.vars_.begin(), o.vars_.end(),
             std::back_inserter(m.vars_));
  return m;
}

std::string Monomial::to_string(int n_w) const {
  if (vars_.empty()) return "1";
  std::ostringstream os;
  for (std::size_t i = 0; i < vars_.size();) {
    std::size_t j = i;
    while (j < vars_.size() && vars_[j] == vars_[i]) ++j;
    if (i) os << '*';
    const int v = vars_[i];
    if (v < n_w) {
      os << 'w' << v + 1;
    } else {
      os << "mu" << v - n_w + 1;
    }
    if (j - i > 1) os << '^' << j - i;
    i = j;
  }
  return os.str();
}

std::size_t MonomialHash::operator()(const Monomial& m) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (VarId v : m.vars()) h = (h ^ v) * 0x100000001b3ULL;
  return h ^ m.vars().size();
}

Monomial reduce_monomial(const Monomial& m, int n_w) {
  std::vector<VarId> out;
  out.reserve(m.vars().size());
  for (VarId v : m.vars()) {
    if (v < n_w && !out.empty() && out.back() == v) continue;
    out.push_back(v);
  }
  return Monomial(std::move(out));
}

Polynomial::Polynomial(double c) {
  if (c != 0.0) terms_[Monomial()] = c;
}

Polynomial Polynomial::variable(VarId v) { return monomial(Monomial::variable(v)); }

Polynomial Polynomial::monomial(const Monomial& m, double c) {
  Polynomial p;
  p.add_term(m, c);
  return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

Polynomial Polynomial::reduced(int n_w) const {
  Polynomial p;
  for (const auto& [m, c] : terms_) p.add_term(reduce_monomial(m, n_w), c);
  return p;
}

double Polynomial::evaluate(const Eigen::VectorXd& values) const {
  double total = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (VarId v : m.vars()) t *= values(v);
    total += t;
  }
  return total;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial p;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) p.add_term(ma * mb, ca * cb);
  return p;
}

}  // namespace rme
