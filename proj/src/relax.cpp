#include "rme/relax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <json.hpp>

namespace rme {
namespace {

Monomial product_reduced(const Monomial& a, const Monomial& b, int n_w) {
  return reduce_monomial(a * b, n_w);
}

LinearTerms combine(LinearTerms terms) {
  std::sort(terms.begin(), terms.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  LinearTerms out;
  for (const auto& [i, c] : terms) {
    if (!out.empty() && out.back().first == i) {
      out.back().second += c;
    } else {
      out.push_back({i, c});
    }
  }
  std::erase_if(out, [](const auto& t) { return t.second == 0.0; });
  return out;
}

// y-linear form of reduce(p * m)
LinearTerms localize(const Polynomial& p, const Monomial& m, const MonomialBasis& moments) {
  LinearTerms terms;
  terms.reserve(p.terms().size());
  for (const auto& [mono, c] : p.terms()) {
    const int idx = moments.find(product_reduced(mono, m, moments.n_w));
    if (idx < 0) throw std::logic_error("localized monomial outside the moment index set");
    terms.push_back({idx, c});
  }
  return combine(std::move(terms));
}

// nullopt when some term falls outside the moment index set
std::optional<LinearTerms> try_localize(const Polynomial& p, const Monomial& m,
                                        const MonomialBasis& moments) {
  LinearTerms terms;
  terms.reserve(p.terms().size());
  for (const auto& [mono, c] : p.terms()) {
    const int idx = moments.find(product_reduced(mono, m, moments.n_w));
    if (idx < 0) return std::nullopt;
    terms.push_back({idx, c});
  }
  return combine(std::move(terms));
}

int localizing_degree(int r, int constraint_degree, const std::string& what) {
  if (constraint_degree > 2 * r)
    throw std::invalid_argument(what + " has degree " + std::to_string(constraint_degree) +
                                ", beyond what order " + std::to_string(r) + " supports");
  return (2 * r - constraint_degree) / 2;
}

void enumerate(int n_w, int n_mu, int degree, std::vector<Monomial>& out) {
  std::vector<VarId> cur;
  // w part: strictly increasing ids; mu part: nondecreasing ids
  auto mu_rec = [&](auto&& self, int first_mu, int budget) -> void {
    out.emplace_back(cur);
    if (budget == 0) return;
    for (int j = first_mu; j < n_mu; ++j) {
      cur.push_back(static_cast<VarId>(n_w + j));
      self(self, j, budget - 1);
      cur.pop_back();
    }
  };
  auto w_rec = [&](auto&& self, int first_w, int budget) -> void {
    mu_rec(mu_rec, 0, budget);
    if (budget == 0) return;
    for (int i = first_w; i < n_w; ++i) {
      cur.push_back(static_cast<VarId>(i));
      self(self, i + 1, budget - 1);
      cur.pop_back();
    }
  };
  w_rec(w_rec, 0, degree);
}

}  // namespace

int MatrixPolynomial::degree() const {
  int d = 0;
  for (const auto& p : entries) d = std::max(d, p.degree());
  return d;
}

AssignmentCheck check_assignment(const PolynomialSystem& sys, const Eigen::VectorXd& values,
                                 double tol) {
  AssignmentCheck c;
  c.boolean = true;
  for (int i = 0; i < sys.n_w; ++i) {
    const double w = values(i);
    if (std::abs(w * w - w) > tol) c.boolean = false;
  }
  c.equality_residual = 0.0;
  for (const auto& h : sys.equalities)
    c.equality_residual = std::max(c.equality_residual, std::abs(h.evaluate(values)));
  c.min_inequality = std::numeric_limits<double>::infinity();
  for (const auto& g : sys.inequalities)
    c.min_inequality = std::min(c.min_inequality, g.evaluate(values));
  c.min_matrix_eig = std::numeric_limits<double>::infinity();
  double matrix_scale = 1.0;
  for (const auto& g : sys.matrix_inequalities) {
    Eigen::MatrixXd m(g.dim, g.dim);
    for (int i = 0; i < g.dim; ++i)
      for (int j = 0; j < g.dim; ++j) m(i, j) = g(i, j).evaluate(values);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    c.min_matrix_eig = std::min(c.min_matrix_eig, es.eigenvalues().minCoeff());
    matrix_scale = std::max(matrix_scale, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  c.feasible = c.boolean && c.equality_residual <= tol * (1.0 + values.cwiseAbs().maxCoeff()) &&
               c.min_inequality >= -tol && c.min_matrix_eig >= -tol * matrix_scale;
  return c;
}

BuiltSystem build_system(const CorruptedSet& zset, double sigma, int k) {
  if (k != 2 && k != 4) throw std::invalid_argument("k must be 2 or 4");
  const int n = zset.n(), d = zset.d();
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (k == 4 && d > 2) throw std::invalid_argument("k = 4 supports d <= 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (n + d > std::numeric_limits<VarId>::max()) throw std::invalid_argument("too many variables");

  PolynomialSystem sys;
  sys.n_w = n;
  sys.n_mu = d;
  sys.eps = zset.epsilon;
  sys.sigma = sigma;
  sys.k = k;
  sys.z = zset.z;
  const double inv_n = 1.0 / n;

  Polynomial mass(-(1.0 - zset.epsilon));
  for (int i = 0; i < n; ++i) mass += inv_n * Polynomial::variable(sys.w(i));
  sys.inequalities.push_back(mass);

  // centred[i][j] = z_ij - mu_j
  std::vector<std::vector<Polynomial>> centred(n, std::vector<Polynomial>(d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centred[i][j] = Polynomial(zset.z(i, j)) - Polynomial::variable(sys.mu(j));

  for (int j = 0; j < d; ++j) {
    Polynomial h;
    for (int i = 0; i < n; ++i) h += inv_n * (Polynomial::variable(sys.w(i)) * centred[i][j]);
    sys.equalities.push_back(h);
  }

  if (k == 2) {
    MatrixPolynomial g(d);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        Polynomial e(a == b ? sigma * sigma : 0.0);
        for (int i = 0; i < n; ++i)
          e -= inv_n * (Polynomial::variable(sys.w(i)) * (centred[i][a] * centred[i][b]));
        g(a, b) = e;
        g(b, a) = e;
      }
    sys.matrix_inequalities.push_back(std::move(g));
  } else {
    const int dd = d * d;
    const double bound = 16.0 * std::pow(sigma, 4);
    MatrixPolynomial g(dd);
    for (int p = 0; p < dd; ++p)
      for (int q = p; q < dd; ++q) {
        Polynomial e(p == q ? bound : 0.0);
        for (int i = 0; i < n; ++i) {
          const Polynomial up = centred[i][p / d] * centred[i][p % d];
          const Polynomial uq = centred[i][q / d] * centred[i][q % d];
          e -= inv_n * (Polynomial::variable(sys.w(i)) * (up * uq));
        }
        g(p, q) = e;
        g(q, p) = e;
      }
    sys.matrix_inequalities.push_back(std::move(g));
  }

  BuiltSystem out{std::move(sys), {}};
  Eigen::VectorXd values = Eigen::VectorXd::Zero(n + d);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  int kept = 0;
  for (int i = 0; i < n; ++i)
    if (zset.mask_wstar[i]) {
      values(i) = 1.0;
      sum += zset.z.row(i).transpose();
      ++kept;
    }
  if (kept > 0) values.tail(d) = sum / kept;
  out.witness.values = values;
  out.witness.check = check_assignment(out.system, values);
  return out;
}

MonomialBasis MonomialBasis::build(int n_w, int n_mu, int degree) {
  if (n_w < 0 || n_mu < 0 || degree < 0) throw std::invalid_argument("bad basis parameters");
  MonomialBasis b;
  b.n_w = n_w;
  b.n_mu = n_mu;
  b.degree = degree;
  enumerate(n_w, n_mu, degree, b.monomials);
  std::sort(b.monomials.begin(), b.monomials.end());
  b.index_.reserve(b.monomials.size() * 2);
  for (int i = 0; i < b.size(); ++i) b.index_.emplace(b.monomials[i], i);
  return b;
}

long long MonomialBasis::expected_size(int n_w, int n_mu, int degree) {
  auto choose = [](long long n, long long k) -> long long {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  long long total = 0;
  for (int s = 0; s <= degree; ++s) total += choose(n_w, s) * choose(n_mu + degree - s, n_mu);
  return total;
}

MonomialBasis MonomialBasis::from_monomials(int n_w, int n_mu, std::vector<Monomial> monomials) {
  MonomialBasis b;
  b.n_w = n_w;
  b.n_mu = n_mu;
  std::sort(monomials.begin(), monomials.end());
  monomials.erase(std::unique(monomials.begin(), monomials.end()), monomials.end());
  b.monomials = std::move(monomials);
  b.degree = b.monomials.empty() ? 0 : b.monomials.back().degree();
  b.index_.reserve(b.monomials.size() * 2);
  for (int i = 0; i < b.size(); ++i) b.index_.emplace(b.monomials[i], i);
  return b;
}

const char* to_string(BasisKind k) { return k == BasisKind::Full ? "full" : "wlinear"; }

BasisKind parse_basis_kind(const std::string& s) {
  if (s == "full") return BasisKind::Full;
  if (s == "wlinear") return BasisKind::WLinear;
  throw std::invalid_argument("unknown basis kind '" + s + "' (full|wlinear)");
}

int MonomialBasis::find(const Monomial& m) const {
  auto it = index_.find(m);
  return it == index_.end() ? -1 : it->second;
}

MomentRelaxation compile(const PolynomialSystem& sys, int r, BasisKind kind) {
  if (r < 1 || r > 3) throw std::invalid_argument("relaxation order must be 1, 2 or 3");
  if (sys.k == 4 && r != 3) throw std::invalid_argument("k = 4 requires r = 3");

  MomentRelaxation rel;
  rel.r = r;
  rel.kind = kind;
  const int n_w = sys.n_w;
  if (kind == BasisKind::Full) {
    rel.basis = MonomialBasis::build(sys.n_w, sys.n_mu, r);
    rel.moments = MonomialBasis::build(sys.n_w, sys.n_mu, 2 * r);
  } else {
    std::vector<Monomial> keep;
    for (auto& m : MonomialBasis::build(0, sys.n_mu, r).monomials) {
      // ids were laid out without w variables; shift them past the w block
      std::vector<VarId> vars = m.vars();
      for (auto& v : vars) v = static_cast<VarId>(v + n_w);
      keep.emplace_back(vars);
      if (m.degree() < r)
        for (int i = 0; i < n_w; ++i) keep.push_back(Monomial(vars) * Monomial::variable(sys.w(i)));
    }
    rel.basis = MonomialBasis::from_monomials(sys.n_w, sys.n_mu, std::move(keep));
    std::vector<Monomial> products;
    const int nb = rel.basis.size();
    products.reserve(static_cast<std::size_t>(nb) * (nb + 1) / 2);
    for (int a = 0; a < nb; ++a)
      for (int b = a; b < nb; ++b)
        products.push_back(product_reduced(rel.basis.monomials[a], rel.basis.monomials[b], n_w));
    rel.moments = MonomialBasis::from_monomials(sys.n_w, sys.n_mu, std::move(products));
  }

  // moment matrix
  {
    PsdBlock m;
    m.label = "moment";
    m.size = rel.basis.size();
    m.entries.reserve(static_cast<std::size_t>(m.size) * (m.size + 1) / 2);
    for (int a = 0; a < m.size; ++a)
      for (int b = a; b < m.size; ++b) {
        const int idx =
            rel.moments.find(product_reduced(rel.basis.monomials[a], rel.basis.monomials[b], n_w));
        m.entries.push_back({a, b, {{idx, 1.0}}});
      }
    rel.blocks.push_back(std::move(m));
  }

  // Localizing multipliers: basis monomials up to the allowed degree. With a restricted
  // basis a candidate joins only if its products with every member (itself included)
  // localize inside the moment set; the scan is in basis order, so the choice is fixed.
  auto multipliers = [&](const std::vector<const Polynomial*>& g, int deg) {
    std::vector<Monomial> out;
    for (const auto& cand : rel.basis.monomials) {
      if (cand.degree() > deg) continue;
      bool ok = true;
      if (kind != BasisKind::Full) {
        for (std::size_t a = 0; a <= out.size() && ok; ++a) {
          const Monomial prod = cand * (a < out.size() ? out[a] : cand);
          for (const Polynomial* p : g)
            if (!try_localize(*p, prod, rel.moments)) {
              ok = false;
              break;
            }
        }
      }
      if (ok) out.push_back(cand);
    }
    return out;
  };

  for (std::size_t c = 0; c < sys.inequalities.size(); ++c) {
    const Polynomial& g = sys.inequalities[c];
    const auto lb = multipliers({&g}, localizing_degree(r, g.degree(), "inequality"));
    PsdBlock blk;
    blk.label = "localizing:ineq" + std::to_string(c);
    blk.size = static_cast<int>(lb.size());
    for (int a = 0; a < blk.size; ++a)
      for (int b = a; b < blk.size; ++b)
        blk.entries.push_back({a, b, localize(g, lb[a] * lb[b], rel.moments)});
    rel.blocks.push_back(std::move(blk));
  }

  for (std::size_t c = 0; c < sys.matrix_inequalities.size(); ++c) {
    const MatrixPolynomial& g = sys.matrix_inequalities[c];
    std::vector<const Polynomial*> parts;
    for (const auto& e : g.entries) parts.push_back(&e);
    const auto lb = multipliers(parts, localizing_degree(r, g.degree(), "matrix inequality"));
    const int nb = static_cast<int>(lb.size());
    PsdBlock blk;
    blk.label = "localizing:matrix" + std::to_string(c);
    blk.size = nb * g.dim;
    // row index (a, i) -> a * dim + i
    for (int p = 0; p < blk.size; ++p)
      for (int q = p; q < blk.size; ++q) {
        const int a = p / g.dim, i = p % g.dim, b = q / g.dim, j = q % g.dim;
        blk.entries.push_back({p, q, localize(g(i, j), lb[a] * lb[b], rel.moments)});
      }
    rel.blocks.push_back(std::move(blk));
  }

  for (const Polynomial& h : sys.equalities) {
    const int deg = h.degree();
    if (deg > 2 * r) throw std::invalid_argument("equality degree exceeds relaxation capacity");
    for (const auto& mono : rel.moments.monomials) {
      if (mono.degree() > 2 * r - deg) break;
      auto t = try_localize(h, mono, rel.moments);
      if (!t) {
        if (kind == BasisKind::Full) throw std::logic_error("localized monomial outside the moment index set");
        continue;
      }
      if (!t->empty()) rel.equalities.push_back({std::move(*t), 0.0});
    }
  }
  return rel;
}

std::string relaxation_to_json(const MomentRelaxation& rel, bool include_entries) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = "rme-moment-relaxation/1";
  j["n_w"] = rel.n_w();
  j["n_mu"] = rel.n_mu();
  j["r"] = rel.r;
  j["basis_kind"] = to_string(rel.kind);
  j["basis_size"] = rel.basis.size();
  j["moment_vector_size"] = rel.moments.size();
  ordered_json basis = ordered_json::array();
  for (const auto& m : rel.basis.monomials) basis.push_back(m.to_string(rel.n_w()));
  j["basis"] = basis;
  ordered_json blocks = ordered_json::array();
  for (const auto& b : rel.blocks) {
    ordered_json bj;
    bj["label"] = b.label;
    bj["size"] = b.size;
    if (include_entries) {
      ordered_json entries = ordered_json::array();
      for (const auto& e : b.entries) {
        ordered_json terms = ordered_json::array();
        for (const auto& [idx, c] : e.terms) terms.push_back({idx, c});
        entries.push_back({e.row, e.col, terms});
      }
      bj["entries"] = entries;
    }
    blocks.push_back(bj);
  }
  j["blocks"] = blocks;
  ordered_json triplets = ordered_json::array();
  for (std::size_t row = 0; row < rel.equalities.size(); ++row)
    for (const auto& [idx, c] : rel.equalities[row].terms) triplets.push_back({row, idx, c});
  j["equalities"] = {{"rows", rel.equalities.size()}, {"triplets", triplets}};
  return j.dump(1);
}

}  // namespace rme
