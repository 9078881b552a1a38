// One PASS/FAIL line per acceptance criterion; exits nonzero if any criterion fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "rme/bench.hpp"
#include "rme/certify.hpp"
#include "rme/estimators.hpp"
#include "rme/toolkit.hpp"

using namespace rme;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double phi(double x) { return boost::math::cdf(boost::math::normal_distribution<>(), x); }

// Two-point law (1 - p) delta_0 + p delta_s, computed from the spec's fields.
double two_point_central_moment(const TwoPointMixture& t, int k) {
  const double p = t.spike_prob, s = t.spike_location - t.base;
  return (1 - p) * std::pow(p * s, k) + p * std::pow((1 - p) * s, k);
}

Outcome lower_bound_exactness() {
  int bad = 0;
  double worst = 0.0;
  for (double eps : {0.1, 0.3, 0.45})
    for (int k : {2, 4}) {
      const auto p = lb_bounded_moment_pair(eps, k);
      const auto& d2 = std::get<TwoPointMixture>(p.d2);
      const double kk = k;
      const double tv = tv_distance(p.d1, p.d2).tv;
      const double gap_formula = std::sqrt(kk) * std::pow(2 * eps, 1 - 1 / kk) * std::pow(1 - 2 * eps, -1 / kk);
      const double gap_direct = d2.spike_prob * d2.spike_location - std::get<TwoPointMixture>(p.d1).base;
      const double moment = two_point_central_moment(d2, k);
      const double errs[] = {std::abs(tv - 2 * eps), std::abs(p.tv - 2 * eps), std::abs(gap_direct - gap_formula),
                             std::abs(p.mean_gap - gap_formula), std::max(0.0, moment - std::pow(kk, kk / 2)),
                             std::abs(moment - p.kth_central_moment_d2)};
      for (double e : errs) {
        worst = std::max(worst, e);
        bad += !(e <= 1e-9);
      }
      bad += !p.pass();
    }
  return {bad == 0, fmt("6 pairs, worst deviation %.1e", worst)};
}

Outcome gaussian_lower_bound() {
  int bad = 0;
  double worst = 0.0;
  for (double eps : {0.3, 0.4, 0.45, 0.49}) {
    const auto p = lb_gaussian_pair(eps);
    const double mu = p.mean_gap;
    const double dev = std::abs(2 * phi(mu / 2) - 1 - 2 * eps);
    worst = std::max(worst, dev);
    bad += !(dev <= 1e-8);
    bad += !(mu >= std::sqrt(std::log(1 / (1 - 2 * eps)) - std::log(2.0)));
    bad += !p.pass();
  }
  return {bad == 0, fmt("4 eps values, worst |2Phi(mu/2)-1-2eps| %.1e", worst)};
}

Outcome gauss_vs_cov_pairs() {
  int bad = 0;
  const auto large = lb_gauss_vs_bounded_cov(0.4, Regime::Large);
  const double delta = 0.2;
  const Law1D l1 = to_law(large.d1), l2 = to_law(large.d2);
  bad += !(std::abs(l2.variance() - 1.45) <= 1e-9);
  bad += !(l2.variance() <= 1 + 3 * delta + 1e-9);
  bad += !(std::abs((l2.mean() - l1.mean()) - std::pow(delta, -0.5)) <= 1e-9);
  bad += !large.pass();
  const double eps = 0.01;
  const auto small = lb_gauss_vs_bounded_cov(eps, Regime::Small);
  const Law1D s1 = to_law(small.d1), s2 = to_law(small.d2);
  bad += !(s2.variance() <= 1 + eps * std::log(1 / eps) + 1e-9);
  bad += !(std::abs(std::abs(s2.mean() - s1.mean()) - eps * std::sqrt(std::log(1 / eps))) <= 1e-9);
  bad += !small.pass();
  return {bad == 0, fmt("large regime variance %.12g gap %.12g; small regime gap %.12g", l2.variance(), l2.mean() - l1.mean(),
                        std::abs(s2.mean() - s1.mean()))};
}

Outcome toolkit() {
  const auto rep = toolkit_suite(10000, 20240501);
  long violations = 0;
  for (const auto& e : rep.entries) violations += e.violations;
  return {rep.pass() && rep.entries.size() >= 8,
          fmt("%.0f inequalities, %.0f violations", static_cast<double>(rep.entries.size()),
              static_cast<double>(violations))};
}

Eigen::MatrixXd block_matrix(const PsdBlock& b, const Eigen::VectorXd& y) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b.size, b.size);
  for (const auto& e : b.entries) {
    double v = 0.0;
    for (const auto& [i, c] : e.terms) v += c * y[i];
    m(e.row, e.col) = m(e.col, e.row) = v;
  }
  return m;
}

Outcome pe_validity() {
  int bad = 0, solved = 0;
  double worst_eq = 0.0, worst_psd = 0.0, worst_sq = 0.0;
  SplitMix64 rng(55);
  for (int i = 0; i < 20; ++i) {
    const double eps = std::vector<double>{0.0, 0.2, 0.4}[i % 3];
    const int d = 1 + i % 2, n = 12;
    const auto s = sample(GaussianIdentity{Eigen::VectorXd::Zero(d)}, n, 300 + i);
    const auto z = corrupt(s, eps, ReplaceWithPoint{Eigen::VectorXd::Constant(1, 6.0)}, derive_seed(300 + i, 1));
    SosSolve out;
    try {
      out = sos_solve(z, 1.5, 2, 2);
    } catch (const EstimationError&) {
      ++bad;
      continue;
    }
    ++solved;
    const auto& pe = out.result.pe;
    const auto& rel = out.relaxation;
    bad += !(std::abs(pe_evaluate(pe, 1.0) - 1.0) <= 1e-8);
    for (const auto& row : rel.equalities) {
      double v = -row.rhs;
      for (const auto& [j, c] : row.terms) v += c * pe.y[j];
      worst_eq = std::max(worst_eq, std::abs(v));
    }
    for (const auto& b : rel.blocks) {
      const Eigen::MatrixXd m = block_matrix(b, pe.y);
      const double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()[0];
      worst_psd = std::max(worst_psd, -ev / (1 + std::abs(m.trace())));
    }
    const Eigen::MatrixXd mom = block_matrix(rel.blocks[0], pe.y);
    const double scale = 1 + mom.trace();
    for (int t = 0; t < 1000; ++t) {
      Polynomial q;
      double norm2 = 0.0;
      for (const auto& mono : rel.basis.monomials) {
        const double c = 2 * rng.uniform() - 1;
        q.add_term(mono, c);
        norm2 += c * c;
      }
      worst_sq = std::max(worst_sq, -pe_evaluate(pe, q * q) / (scale * norm2));
    }
  }
  bad += !(worst_eq <= 1e-6) + !(worst_psd <= 1e-6) + !(worst_sq <= 1e-6);
  return {bad == 0, fmt("%.0f/20 solved; max eq residual %.1e, psd slack %.1e, -E[q^2]/scale %.1e", solved, worst_eq,
                        worst_psd, worst_sq)};
}

Outcome certified_bound() {
  const double sigma = 1.5;
  int pass = 0, fail = 0, skipped = 0;
  double worst = -1e300;
  for (int i = 0; i < 10; ++i) {
    const double eps = i % 2 ? 0.4 : 0.2;
    const auto s = sample(GaussianIdentity{Eigen::VectorXd::Zero(1)}, 10, 700 + i);
    const auto z = corrupt(s, eps, ReplaceWithPoint{Eigen::VectorXd::Constant(1, 8.0)}, derive_seed(700 + i, 1));
    SosOptions o;
    o.slack = 1.0;
    PeBoundReport rep;
    try {
      const auto out = sos_solve(z, sigma, 2, 3, o);
      rep = check_pe_error_bound(out.result.pe, z, sigma, 2, 1e-3);
    } catch (const EstimationError&) {
      ++fail;
      continue;
    }
    if (rep.status == BoundStatus::Skipped) {
      ++skipped;
      continue;
    }
    const double bound = bounds::bcov_optimal(eps) * sigma * sigma;
    const bool ok = rep.value <= bound + 1e-3;
    worst = std::max(worst, rep.value - bound);
    ok ? ++pass : ++fail;
  }
  return {fail == 0 && pass > 0,
          fmt("%.0f pass, %.0f fail, %.0f skipped; max E[|mu-mu*|^2] - bound %.3g", pass, fail, skipped, worst)};
}

Outcome outlier_magnitude() {
  std::vector<double> sos_med, mean_med;
  int failures = 0;
  for (double loc : {10.0, 1e3, 1e5}) {
    std::vector<double> sos, mean;
    for (int t = 0; t < 20; ++t) {
      const std::uint64_t seed = 5000 + t;
      const auto s = sample(GaussianIdentity{Eigen::VectorXd::Zero(2)}, 40, seed);
      const auto z = corrupt(s, 0.4, ReplaceWithPoint{Eigen::VectorXd::Constant(1, loc)}, derive_seed(seed, 7));
      SosOptions o;
      o.basis = BasisKind::WLinear;
      try {
        sos.push_back(sos_mean(z, 1.0, 2, 2, o).error);
      } catch (const EstimationError& e) {
        ++failures;
        sos.push_back(e.report().error);
      }
      mean.push_back(sample_mean(z).error);
    }
    sos_med.push_back(median(sos));
    mean_med.push_back(median(mean));
  }
  const auto [lo, hi] = std::minmax_element(sos_med.begin(), sos_med.end());
  const double spread = (*hi - *lo) / *lo;
  const double growth = mean_med[2] / mean_med[0];
  return {spread < 0.5 && growth >= 100.0,
          fmt("sos medians %.3f/%.3f/%.3f (spread %.0f%%)", sos_med[0], sos_med[1], sos_med[2], 100 * spread) +
              fmt(", mean growth %.3g, %.0f solver failures", growth, failures)};
}

Outcome rate_fit() {
  const auto cfg = parse_config(
      "dist = gaussian\n"
      "strategy = point:3.6;0\n"
      "eps = 0.1, 0.2, 0.3, 0.4, 0.45\n"
      "n = 40\nd = 2\nk = 2\nr = 2\nbasis = wlinear\n"
      "sigma = 1.2\ntrials = 20\nseed = 1000\n"
      "estimators = sos\n");
  const auto rep = run_sweep(cfg);
  const auto groups = rep.summarize();
  bool monotone = true;
  std::string meds;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i > 0 && groups[i].median < groups[i - 1].median) monotone = false;
    meds += fmt(i ? "/%.3f" : "%.3f", groups[i].median);
  }
  const auto fit = fit_rate(rep, "sos", 0.2);
  double lo = 1e300, hi = 0.0;
  for (const auto& p : fit.pairs) lo = std::min(lo, p.ratio()), hi = std::max(hi, p.ratio());
  return {monotone && fit.pass(), "medians " + meds + fmt(", ratios in [%.2f, %.2f]", lo, hi)};
}

Outcome gaussian_projection() {
  const double eps = 0.45, delta = 1 - 2 * eps, limit = 3 * std::sqrt(std::log(1 / delta));
  const auto pair = lb_gaussian_pair(eps);
  double worst = 0.0;
  int bad = 0;
  for (int s = 0; s < 20; ++s) {
    const auto z = mixture_tv_contamination(pair.d1, pair.d2, eps, 10000, 900 + s);
    const auto r = gaussian_projection_1d(z.z.col(0), 10.0, 0.01, z.mu_star[0]);
    worst = std::max(worst, r.error);
    bad += !(r.error <= limit);
  }
  return {bad == 0, fmt("worst error %.3f, limit %.3f", worst, limit)};
}

Outcome sparse_facts() {
  SplitMix64 rng(77);
  int truncation = 0, equivalence = 0;
  for (int t = 0; t < 10000; ++t) {
    const int d = 1 + static_cast<int>(rng() % 8), k = 1 + static_cast<int>(rng() % d);
    Eigen::VectorXd x(d), a = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) x[i] = 6 * rng.uniform() - 3;
    std::vector<int> idx(d);
    for (int i = 0; i < d; ++i) idx[i] = i;
    for (int i = d - 1; i > 0; --i) std::swap(idx[i], idx[rng() % (i + 1)]);
    for (int i = 0; i < k; ++i) a[idx[i]] = 6 * rng.uniform() - 3;
    truncation += !((sparse_truncate(x, k) - a).norm() <= 3 * norm_2k(x - a, k) * (1 + 1e-12));
    // sup over k-sparse unit v of <x, v> is attained at v = x_S / |x_S| for some |S| = k
    double best = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      if (std::popcount(mask) != k) continue;
      double s2 = 0.0;
      for (int i = 0; i < d; ++i)
        if (mask >> i & 1u) s2 += x[i] * x[i];
      best = std::max(best, std::sqrt(s2));
    }
    equivalence += !(std::abs(norm_2k(x, k) - best) <= 1e-12 * (1 + best));
  }
  return {truncation == 0 && equivalence == 0,
          fmt("10000 draws, %.0f truncation and %.0f norm violations", truncation, equivalence)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "lower-bound exactness", 1, lower_bound_exactness},
      {2, "gaussian lower bound", 1, gaussian_lower_bound},
      {3, "gaussian vs bounded-covariance pairs", 1, gauss_vs_cov_pairs},
      {4, "toolkit suite", 30, toolkit},
      {5, "pseudo-expectation validity", 600, pe_validity},
      {6, "certified bound at degree 6", 900, certified_bound},
      {7, "outlier-magnitude independence", 600, outlier_magnitude},
      {8, "rate fit", 1800, rate_fit},
      {9, "1-d gaussian projection", 60, gaussian_projection},
      {10, "sparse facts", 10, sparse_facts},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.pass && secs < c.budget_s;
    failed += !ok;
    std::printf("criterion %2d %s: %s  %s  [%.2fs of %.0fs]\n", c.id, c.name, ok ? "PASS" : "FAIL", o.detail.c_str(),
                secs, c.budget_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
