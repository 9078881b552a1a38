#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "rme/relax.hpp"

using namespace rme;

namespace {

Monomial mono(std::vector<VarId> v) { return Monomial(std::move(v)); }

CorruptedSet from_rows(const Eigen::MatrixXd& z, double eps, std::vector<std::uint8_t> mask) {
  CorruptedSet c;
  c.z = z;
  c.epsilon = eps;
  c.mask_wstar = std::move(mask);
  c.mu_star = z.colwise().mean().transpose();
  return c;
}

Eigen::VectorXd moment_vector(const MonomialBasis& moments, const Eigen::VectorXd& point) {
  Eigen::VectorXd y(moments.size());
  for (int i = 0; i < moments.size(); ++i) y[i] = Polynomial::monomial(moments.monomials[i]).evaluate(point);
  return y;
}

double term_value(const LinearTerms& t, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (const auto& [i, c] : t) s += c * y[i];
  return s;
}

double block_min_eig(const PsdBlock& b, const Eigen::VectorXd& y) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b.size, b.size);
  for (const auto& e : b.entries) m(e.row, e.col) = m(e.col, e.row) = term_value(e.terms, y);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

}  // namespace

// ids: w1 = 0, w2 = 1, mu1 = 2 when n_w = 2
TEST(Relax, ReduceMonomial) {
  EXPECT_EQ(reduce_monomial(mono({0, 0, 0, 2}), 2), mono({0, 2}));
  EXPECT_EQ(reduce_monomial(mono({2, 2}), 2), mono({2, 2}));
  EXPECT_EQ(reduce_monomial(mono({0, 0, 1, 1, 3}), 2), mono({0, 1, 3}));
}

TEST(Relax, ReduceIdempotentAndDegreeNonincreasing) {
  SplitMix64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    std::vector<VarId> v;
    const int deg = static_cast<int>(rng() % 7);
    for (int i = 0; i < deg; ++i) v.push_back(static_cast<VarId>(rng() % 6));
    const Monomial m(v), r = reduce_monomial(m, 3);
    EXPECT_EQ(reduce_monomial(r, 3), r);
    EXPECT_LE(r.degree(), m.degree());
  }
}

TEST(Relax, ConstraintCounting) {
  Eigen::MatrixXd z(2, 1);
  z << 0.3, -0.2;
  const auto built = build_system(from_rows(z, 0.4, {1, 1}), 1.0, 2);
  const auto& sys = built.system;
  EXPECT_EQ(sys.booleanity_count(), 2);
  EXPECT_EQ(sys.inequalities.size(), 1u);
  EXPECT_EQ(sys.equalities.size(), 1u);
  ASSERT_EQ(sys.matrix_inequalities.size(), 1u);
  EXPECT_EQ(sys.matrix_inequalities[0].dim, 1);
}

TEST(Relax, CleanWitnessFeasible) {
  Eigen::MatrixXd z(4, 1);
  z << 1, -1, 0, 0;  // variance 0.5
  const auto built = build_system(from_rows(z, 0.0, {1, 1, 1, 1}), 1.0, 2);
  EXPECT_TRUE(built.witness.check.feasible);
  EXPECT_NEAR(built.witness.values[4], 0.0, 1e-15);
}

TEST(Relax, OutlierWitnessVersusAllOnes) {
  Eigen::MatrixXd z(3, 1);
  z << 0.5, -0.5, 1e6;
  const auto built = build_system(from_rows(z, 1.0 / 3.0, {1, 1, 0}), 1.0, 2);
  EXPECT_TRUE(built.witness.check.feasible);
  Eigen::VectorXd all(4);
  all << 1, 1, 1, z.col(0).mean();
  const auto check = check_assignment(built.system, all);
  EXPECT_FALSE(check.feasible);
  EXPECT_LT(check.min_matrix_eig, 0.0);
}

TEST(Relax, BuildGuards) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 3);
  const auto c = from_rows(z, 0.0, {1, 1, 1, 1});
  EXPECT_THROW(build_system(c, 1.0, 3), std::invalid_argument);
  EXPECT_THROW(build_system(c, 1.0, 4), std::invalid_argument);
  EXPECT_THROW(build_system(c, 0.0, 2), std::invalid_argument);
}

TEST(Relax, DegreeBounds) {
  SplitMix64 rng(1);
  Eigen::MatrixXd z(5, 2);
  for (int i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform();
  const auto c = from_rows(z, 0.2, {1, 1, 1, 1, 0});
  for (int k : {2, 4}) {
    const auto sys = build_system(c, 1.0, k).system;
    int deg = 0;
    for (const auto& p : sys.equalities) deg = std::max(deg, p.degree());
    for (const auto& p : sys.inequalities) deg = std::max(deg, p.degree());
    for (const auto& m : sys.matrix_inequalities) deg = std::max(deg, m.degree());
    EXPECT_LE(deg, k == 2 ? 3 : 5);
  }
}

TEST(Relax, BasisEnumerationSmall) {
  const auto b1 = MonomialBasis::build(2, 1, 1);
  EXPECT_EQ(b1.monomials, (std::vector<Monomial>{mono({}), mono({0}), mono({1}), mono({2})}));
  const auto b2 = MonomialBasis::build(2, 1, 2);
  EXPECT_EQ(b2.monomials, (std::vector<Monomial>{mono({}), mono({0}), mono({1}), mono({2}), mono({0, 1}),
                                                 mono({0, 2}), mono({1, 2}), mono({2, 2})}));
}

TEST(Relax, BasisSizeCounting) {
  EXPECT_EQ(MonomialBasis::build(12, 1, 3).size(), 392);
  EXPECT_EQ(MonomialBasis::expected_size(12, 1, 3), 392);
  // exhaustive oracle: multilinear in w, any power of mu
  for (int n = 1; n <= 5; ++n)
    for (int d = 1; d <= 2; ++d)
      for (int r = 1; r <= 3; ++r) {
        const int vars = n + d;
        long long count = 0;
        std::vector<std::vector<VarId>> level = {{}};
        for (int deg = 0; deg <= r; ++deg) {
          std::vector<std::vector<VarId>> next;
          for (const auto& v : level) {
            count += reduce_monomial(Monomial(v), n) == Monomial(v);
            for (int x = v.empty() ? 0 : v.back(); x < vars; ++x) {
              auto u = v;
              u.push_back(static_cast<VarId>(x));
              next.push_back(std::move(u));
            }
          }
          level = std::move(next);
        }
        EXPECT_EQ(MonomialBasis::build(n, d, r).size(), static_cast<int>(count)) << n << d << r;
        EXPECT_EQ(MonomialBasis::expected_size(n, d, r), count);
      }
}

TEST(Relax, BasisSortedClosed) {
  const auto b = MonomialBasis::build(4, 2, 3);
  for (int i = 1; i < b.size(); ++i) EXPECT_LT(b.monomials[i - 1], b.monomials[i]);
  for (const auto& m : b.monomials)
    for (std::size_t drop = 0; drop < m.vars().size(); ++drop) {
      auto v = m.vars();
      v.erase(v.begin() + static_cast<long>(drop));
      EXPECT_GE(b.find(Monomial(v)), 0);
    }
}

TEST(Relax, MomentClosure) {
  Eigen::MatrixXd z(4, 1);
  z << 0.1, 0.4, -0.3, 2.0;
  const auto sys = build_system(from_rows(z, 0.25, {1, 1, 1, 0}), 1.0, 2).system;
  const auto rel = compile(sys, 2);
  for (const auto& a : rel.basis.monomials)
    for (const auto& b : rel.basis.monomials) EXPECT_GE(rel.moments.find(reduce_monomial(a * b, 4)), 0);
  for (const auto& blk : rel.blocks)
    for (const auto& e : blk.entries)
      for (const auto& [i, c] : e.terms) {
        EXPECT_GE(i, 0);
        EXPECT_LT(i, rel.moments.size());
      }
  EXPECT_EQ(rel.blocks[0].size, rel.basis.size());
  // the moment matrix's (1,1) entry is y[1]
  const auto& e0 = rel.blocks[0].entries[0];
  ASSERT_EQ(e0.terms.size(), 1u);
  EXPECT_EQ(rel.moments.monomials[e0.terms[0].first], Monomial());
}

TEST(Relax, CompileGuards) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 1);
  const auto c = from_rows(z, 0.0, {1, 1, 1});
  EXPECT_THROW(compile(build_system(c, 1.0, 2).system, 4), std::invalid_argument);
  EXPECT_THROW(compile(build_system(c, 1.0, 4).system, 2), std::invalid_argument);
}

// Rank-one moment vectors of feasible points satisfy every compiled constraint.
TEST(Relax, RankOneFeasibility) {
  SplitMix64 rng(12);
  int tested = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 4 + static_cast<int>(rng() % 3), d = 1 + static_cast<int>(rng() % 2);
    const int k = (t % 4 == 3) ? 4 : 2;
    Eigen::MatrixXd z(n, d);
    for (int i = 0; i < z.size(); ++i) z.data()[i] = 2.0 * rng.uniform() - 1.0;
    const int bad = static_cast<int>(rng() % 2);
    std::vector<std::uint8_t> mask(n, 1);
    for (int i = 0; i < bad; ++i) {
      z.row(i).setConstant(5.0);
      mask[i] = 0;
    }
    const auto built = build_system(from_rows(z, 0.25, mask), 2.0, k);
    ASSERT_TRUE(built.witness.check.feasible);
    for (BasisKind kind : {BasisKind::Full, BasisKind::WLinear}) {
      const auto rel = compile(built.system, k == 4 ? 3 : 2, kind);
      const Eigen::VectorXd y = moment_vector(rel.moments, built.witness.values);
      for (const auto& row : rel.equalities) EXPECT_NEAR(term_value(row.terms, y), row.rhs, 1e-9);
      for (const auto& b : rel.blocks) EXPECT_GE(block_min_eig(b, y), -1e-9) << b.label;
      ++tested;
    }
  }
  EXPECT_EQ(tested, 200);
}

TEST(Relax, WLinearBasis) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Random(6, 2);
  const auto sys = build_system(from_rows(z, 0.0, std::vector<std::uint8_t>(6, 1)), 3.0, 2).system;
  const auto rel = compile(sys, 2, BasisKind::WLinear);
  for (const auto& m : rel.basis.monomials) {
    int ws = 0;
    for (VarId v : m.vars()) ws += v < 6;
    EXPECT_LE(ws, 1);
  }
  EXPECT_EQ(rel.basis.size(), 6 * 3 + 6);  // {1, mu, mu^2} x (1 + w_i)
}

TEST(Relax, JsonDeterministic) {
  Eigen::MatrixXd z(3, 1);
  z << 0.0, 1.0, 2.0;
  const auto sys = build_system(from_rows(z, 0.0, {1, 1, 1}), 1.0, 2).system;
  const std::string a = relaxation_to_json(compile(sys, 2), true);
  EXPECT_EQ(a, relaxation_to_json(compile(sys, 2), true));
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["basis_kind"], "full");
}
