#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rme/adversary.hpp"
#include "rme/polynomial.hpp"

namespace rme {

struct MatrixPolynomial {
  int dim = 0;
  std::vector<Polynomial> entries;  // row-major, symmetric

  explicit MatrixPolynomial(int n = 0) : dim(n), entries(static_cast<std::size_t>(n) * n) {}
  Polynomial& operator()(int i, int j) { return entries[static_cast<std::size_t>(i) * dim + j]; }
  const Polynomial& operator()(int i, int j) const {
    return entries[static_cast<std::size_t>(i) * dim + j];
  }
  int degree() const;
};

// Booleanity w_i^2 = w_i holds for every w variable and is applied as a rewrite,
// so it never appears among the explicit constraints.
struct PolynomialSystem {
  int n_w = 0;
  int n_mu = 0;
  std::vector<Polynomial> equalities;                 // h = 0
  std::vector<Polynomial> inequalities;               // g >= 0
  std::vector<MatrixPolynomial> matrix_inequalities;  // G psd

  // robust-mean metadata (unset for hand-built systems)
  double eps = 0.0;
  double sigma = 0.0;
  int k = 0;
  Eigen::MatrixXd z;

  int booleanity_count() const { return n_w; }
  VarId w(int i) const { return static_cast<VarId>(i); }
  VarId mu(int j) const { return static_cast<VarId>(n_w + j); }
};

struct AssignmentCheck {
  bool feasible = false;
  bool boolean = false;
  double equality_residual = 0.0;  // max |h|
  double min_inequality = 0.0;     // min g (inf if none)
  double min_matrix_eig = 0.0;     // min over G of lambda_min (inf if none)
};

// values: w then mu
AssignmentCheck check_assignment(const PolynomialSystem& sys, const Eigen::VectorXd& values,
                                 double tol = 1e-9);

struct Witness {
  Eigen::VectorXd values;  // (w*, mean of retained rows)
  AssignmentCheck check;
};

struct BuiltSystem {
  PolynomialSystem system;
  Witness witness;
};

// The reduced system over (w, mu), with every constraint divided by n:
//   mass       (1/n) sum w_i - (1 - eps) >= 0
//   mean-link  (1/n) sum w_i (z_ij - mu_j) = 0                      j = 1..d
//   k = 2      sigma^2 I - (1/n) sum w_i (z_i - mu)(z_i - mu)^T  psd  (d x d)
//   k = 4      16 sigma^4 I - (1/n) sum w_i u_i u_i^T            psd  (d^2 x d^2)
//              with u_i = (z_i - mu) (x) (z_i - mu)
BuiltSystem build_system(const CorruptedSet& z, double sigma, int k);

struct MonomialBasis {
  int n_w = 0;
  int n_mu = 0;
  int degree = 0;
  std::vector<Monomial> monomials;  // graded lex, reduced, duplicate-free

  static MonomialBasis build(int n_w, int n_mu, int degree);
  // sorted and deduplicated; degree becomes the largest degree present
  static MonomialBasis from_monomials(int n_w, int n_mu, std::vector<Monomial> monomials);
  // sum_{s=0..degree} C(n_w, s) * C(n_mu + degree - s, n_mu)
  static long long expected_size(int n_w, int n_mu, int degree);

  int size() const { return static_cast<int>(monomials.size()); }
  int find(const Monomial& m) const;  // -1 when absent

 private:
  std::unordered_map<Monomial, int, MonomialHash> index_;
};

using LinearTerms = std::vector<std::pair<int, double>>;  // (index into y, coefficient)

struct BlockEntry {
  int row = 0;
  int col = 0;  // row <= col
  LinearTerms terms;
};

struct PsdBlock {
  std::string label;
  int size = 0;
  std::vector<BlockEntry> entries;  // full upper triangle, row-major
};

struct LinearRow {
  LinearTerms terms;
  double rhs = 0.0;
};

// Full: every monomial of degree <= r. WLinear: only those with at most one w factor;
// the moment vector then covers exactly the pairwise products, and localizing and
// equality multipliers are restricted to those whose products stay inside it.
enum class BasisKind { Full, WLinear };
const char* to_string(BasisKind k);
BasisKind parse_basis_kind(const std::string& s);

struct MomentRelaxation {
  int r = 0;
  BasisKind kind = BasisKind::Full;
  MonomialBasis basis;    // degree <= r
  MonomialBasis moments;  // products of basis pairs (all of degree <= 2r when Full), indexes y
  std::vector<PsdBlock> blocks;     // blocks[0] is the moment matrix
  std::vector<LinearRow> equalities;

  int n_w() const { return basis.n_w; }
  int n_mu() const { return basis.n_mu; }
};

MomentRelaxation compile(const PolynomialSystem& sys, int r, BasisKind kind = BasisKind::Full);

// Documented in README ("Relaxation JSON"); entry maps only when requested.
std::string relaxation_to_json(const MomentRelaxation& rel, bool include_entries = false);

}  // namespace rme
