#include "rme/certify.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "rme/relax.hpp"

namespace rme {

Check make_check(std::string name, double value, std::string relation, double reference,
                 double tol) {
  Check c{std::move(name), value, reference, std::move(relation), tol, false};
  if (c.relation == "==") {
    c.pass = std::abs(value - reference) <= tol;
  } else if (c.relation == "<=") {
    c.pass = value <= reference + tol;
  } else if (c.relation == ">=") {
    c.pass = value >= reference - tol;
  } else {
    throw std::invalid_argument("unknown relation " + c.relation);
  }
  return c;
}

bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

constexpr double kExact = 1e-9;

void require_eps(double eps, double lo, double hi, const char* what) {
  if (!(eps > lo && eps < hi)) {
    std::ostringstream os;
    os << what << " needs eps in (" << lo << ", " << hi << "), got " << eps;
    throw std::invalid_argument(os.str());
  }
}

// Closed forms against what the generic law machinery computes for the same pair.
void law_checks(LowerBoundPair& p) {
  const Law1D a = to_law(p.d1), b = to_law(p.d2);
  const TvResult tv = tv_distance(a, b);
  p.checks.push_back(make_check("tv closed form = integrated", p.tv, "==", tv.tv, kExact));
  p.checks.push_back(make_check("tv + overlap = 1", tv.tv + tv.overlap, "==", 1.0, 0.0));
  p.checks.push_back(make_check("mean gap closed form = law", p.mean_gap, "==",
                                std::abs(b.mean() - a.mean()), kExact));
  if (!std::isnan(p.variance_d2))
    p.checks.push_back(make_check("D2 variance closed form = law", p.variance_d2, "==",
                                  b.variance(), kExact));
  if (p.k > 0)
    p.checks.push_back(make_check("D2 k-th central moment closed form = law",
                                  p.kth_central_moment_d2, "==", b.central_moment(p.k),
                                  kExact * std::max(1.0, p.kth_central_moment_d2)));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

}  // namespace

LowerBoundPair lb_bounded_moment_pair(double eps, int k) {
  require_eps(eps, 0.0, 0.5, "bounded-moment pair");
  if (k < 2 || k % 2 != 0) throw std::invalid_argument("k must be an even integer >= 2");
  LowerBoundPair p;
  p.family = "moment";
  p.eps = eps;
  p.k = k;
  const double delta = 1.0 - 2.0 * eps;
  const double spike = spike_location(eps, k);
  p.d1 = TwoPointMixture{0.0, 0.0, 0.0};
  p.d2 = TwoPointMixture{0.0, spike, 2.0 * eps};
  p.tv = 2.0 * eps;
  p.mean_gap = std::sqrt(k) * std::pow(2.0 * eps, 1.0 - 1.0 / k) * std::pow(delta, -1.0 / k);
  const double kk = std::pow(k, k / 2.0);
  p.kth_central_moment_d2 = kk * (std::pow(2.0 * eps, k - 1) + std::pow(delta, k - 1));
  p.variance_d2 = spike * spike * 2.0 * eps * delta;
  law_checks(p);
  p.checks.push_back(make_check("tv <= 2 eps", p.tv, "<=", 2.0 * eps, kExact));
  p.checks.push_back(make_check("k-th central moment <= k^(k/2)", p.kth_central_moment_d2, "<=",
                                kk, kExact * kk));
  return p;
}

LowerBoundPair lb_gaussian_pair(double eps) {
  require_eps(eps, 0.25, 0.5, "Gaussian pair");
  LowerBoundPair p;
  p.family = "gaussian";
  p.eps = eps;
  const double target = 2.0 * eps;
  auto f = [&](double mu) { return 2.0 * normal_cdf(mu / 2.0) - 1.0 - target; };
  double hi = 1.0;
  while (f(hi) < 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto [lo_root, hi_root] =
      boost::math::tools::toms748_solve(f, 0.0, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double mu = 0.5 * (lo_root + hi_root);
  p.d1 = GaussianIdentity{Eigen::VectorXd::Zero(1)};
  p.d2 = GaussianIdentity{Eigen::VectorXd::Constant(1, mu)};
  p.tv = 2.0 * normal_cdf(mu / 2.0) - 1.0;
  p.mean_gap = mu;
  p.variance_d2 = 1.0;
  law_checks(p);
  p.checks.push_back(make_check("2 Phi(mu/2) - 1 = 2 eps", p.tv, "==", target, 1e-8));
  p.checks.push_back(
      make_check("root = 2 Phi^-1(1/2 + eps)", mu, "==", 2.0 * normal_quantile(0.5 + eps), 1e-8));
  const double floor = std::sqrt(std::log(1.0 / (1.0 - 2.0 * eps)) - std::log(2.0));
  p.checks.push_back(make_check("mu >= sqrt(ln(1/(1-2 eps)) - ln 2)", mu, ">=", floor, 0.0));
  return p;
}

Regime parse_regime(const std::string& s) {
  if (s == "large") return Regime::Large;
  if (s == "small") return Regime::Small;
  throw std::invalid_argument("regime must be large or small");
}

LowerBoundPair lb_gauss_vs_bounded_cov(double eps, Regime regime) {
  LowerBoundPair p;
  p.eps = eps;
  p.d1 = GaussianIdentity{Eigen::VectorXd::Zero(1)};
  if (regime == Regime::Large) {
    require_eps(eps, 0.25, 0.5, "large regime");
    p.family = "gauss-vs-cov:large";
    const double delta = 1.0 - 2.0 * eps;
    p.d2 = GaussianWithSpike{0.0, 1.0 / (std::sqrt(delta) * 2.0 * eps), 2.0 * eps};
    p.tv = 2.0 * eps;
    p.mean_gap = 1.0 / std::sqrt(delta);
    p.variance_d2 = 1.0 + delta * (1.0 + 1.0 / (2.0 * eps));
    law_checks(p);
    p.checks.push_back(make_check("tv <= 2 eps", p.tv, "<=", 2.0 * eps, kExact));
    p.checks.push_back(make_check("variance <= 1 + 3 delta", p.variance_d2, "<=", 1.0 + 3.0 * delta, kExact));
    p.checks.push_back(make_check("gap >= delta^(-1/2)", p.mean_gap, ">=", 1.0 / std::sqrt(delta), kExact));
  } else {
    require_eps(eps, 0.0, 0.1 + 1e-12, "small regime");
    p.family = "gauss-vs-cov:small";
    const double l = std::log(1.0 / eps);
    p.d2 = GaussianWithSpike{0.0, std::sqrt(l), eps};
    p.tv = eps;
    p.mean_gap = eps * std::sqrt(l);
    p.variance_d2 = (1.0 - eps) + eps * (1.0 - eps) * l;
    law_checks(p);
    p.checks.push_back(make_check("tv <= eps", p.tv, "<=", eps, kExact));
    p.checks.push_back(make_check("variance <= 1 + eps ln(1/eps)", p.variance_d2, "<=", 1.0 + eps * l, kExact));
    p.checks.push_back(make_check("gap >= eps sqrt(ln(1/eps))", p.mean_gap, ">=", eps * std::sqrt(l), kExact));
  }
  return p;
}

TvReport tv_distance(const DistributionSpec& a, const DistributionSpec& b) {
  const Law1D la = to_law(a), lb = to_law(b);
  const TvResult integrated = tv_distance(la, lb);
  TvReport r;
  const bool pure_normals = la.atoms.empty() && lb.atoms.empty() && la.normals.size() == 1 &&
                            lb.normals.size() == 1 && la.normals[0].sd == lb.normals[0].sd;
  if (pure_normals) {
    const double gap = std::abs(la.normals[0].mean - lb.normals[0].mean);
    r.tv = 2.0 * normal_cdf(gap / (2.0 * la.normals[0].sd)) - 1.0;
    r.closed_form = true;
    r.cross_check = std::abs(r.tv - integrated.tv);
  } else {
    r.tv = integrated.tv;
  }
  r.overlap = 1.0 - r.tv;
  return r;
}

FeasibilityReport check_feasibility_identities(const CorruptedSet& z, const std::vector<double>& w) {
  const int n = z.n();
  if (static_cast<int>(w.size()) != n) throw std::invalid_argument("w must have one entry per row");
  int kept = 0;
  for (double v : w) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("w must be boolean");
    kept += v == 1.0;
  }
  if (kept < (1.0 - z.epsilon) * n - 1e-9)
    throw std::invalid_argument("w violates the mass constraint");

  FeasibilityReport r;
  int consistent = 0, idempotent = 0, both = 0;
  for (int i = 0; i < n; ++i) {
    const int ww = static_cast<int>(w[i]) * z.mask_wstar[i];
    both += ww;
    idempotent += (1 - ww) * (1 - ww) == (1 - ww);
    // w_i w*_i z_i = w_i w*_i x*_i, compared exactly
    bool same = true;
    if (z.origin)
      for (int j = 0; j < z.d(); ++j) same = same && ww * z.z(i, j) == ww * z.origin->data(i, j);
    consistent += same;
  }
  r.checks.push_back(make_check("w w* z = w w* x* (rows)", consistent, "==", n, 0.0));
  r.checks.push_back(make_check("(1 - w w*)^2 = 1 - w w* (rows)", idempotent, "==", n, 0.0));
  r.checks.push_back(make_check("(1/n) sum (1 - w w*) <= 2 eps", static_cast<double>(n - both) / n, "<=",
                                2.0 * z.epsilon, 1e-12));
  r.checks.push_back(make_check("(1/n) sum w w* >= 1 - 2 eps", static_cast<double>(both) / n, ">=",
                                1.0 - 2.0 * z.epsilon, 1e-12));
  return r;
}

namespace bounds {
namespace {
double delta_of(double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in [0, 1/2)");
  return 1.0 - 2.0 * eps;
}
}  // namespace

double bcov_optimal(double eps) { return 8.0 * eps / delta_of(eps); }
double bcov_breakdown(double eps) {
  const double d = delta_of(eps);
  return 8.0 * eps / (d * d);
}
double moment_optimal(double eps, int k) { return 4.0 * k / std::pow(delta_of(eps), 2.0 / k); }
double moment_breakdown(double eps, int k) {
  const double d = delta_of(eps);
  const double kth = std::pow(2.0, 2 * k - 1) * std::pow(eps, k - 1) * std::pow(k, k / 2.0) /
                     std::pow(d, k);
  return std::pow(kth, 2.0 / k);
}
double sparse_breakdown(double eps, int t, double m) {
  if (t < 1 || !(m > 0.0)) throw std::invalid_argument("t >= 1 and M > 0 required");
  return std::pow(2.0, 2.0 - 1.0 / t) * std::pow(eps, 1.0 - 1.0 / t) * std::pow(m, 1.0 / t) /
         delta_of(eps);
}
double gaussian(double eps) { return std::sqrt(std::log(1.0 / delta_of(eps))); }

std::pair<double, double> for_order(double eps, int k) {
  if (k == 2) return {bcov_optimal(eps), bcov_breakdown(eps)};
  return {moment_optimal(eps, k), moment_breakdown(eps, k)};
}
}  // namespace bounds

const char* to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Pass:
      return "pass";
    case BoundStatus::Fail:
      return "fail";
    case BoundStatus::Skipped:
      return "skipped";
  }
  return "unknown";
}

double directional_fourth_moment(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const int n = static_cast<int>(x.rows());
  if (x.cols() == 1) return c.array().pow(4).sum() / n;
  if (x.cols() != 2) throw std::invalid_argument("directional fourth moment supports d <= 2");
  auto f = [&](double th) {
    const Eigen::Vector2d v(std::cos(th), std::sin(th));
    return (c * v).array().pow(4).sum() / n;
  };
  constexpr int kGrid = 3600;
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i < kGrid; ++i) {
    const double val = f(std::numbers::pi * i / kGrid);
    if (val > best_val) {
      best_val = val;
      best = i;
    }
  }
  const double step = std::numbers::pi / kGrid;
  const auto [th, neg] = boost::math::tools::brent_find_minima(
      [&](double t) { return -f(t); }, (best - 1) * step, (best + 1) * step, 50);
  return std::max(best_val, -neg);
}

PeBoundReport check_pe_error_bound(const PseudoExpectation& pe, const CorruptedSet& z, double sigma,
                                   int k, double slack) {
  if (k != 2 && k != 4) throw std::invalid_argument("k must be 2 or 4");
  PeBoundReport r;
  if (pe.degree() < 6)
    r.advisory = "pseudo-expectation degree " + std::to_string(pe.degree()) +
                 " is below the degree 6 the bound is proved at";
  if (!z.origin) {
    r.diagnostics = "no uncorrupted sample attached";
    return r;
  }
  std::ostringstream diag;
  if (k == 2) {
    const double cov = covariance_opnorm(z.origin->data);
    if (cov > sigma * sigma) {
      diag << "uncorrupted covariance op-norm " << cov << " exceeds sigma^2 = " << sigma * sigma;
      r.diagnostics = diag.str();
      return r;
    }
  } else {
    const double m4 = directional_fourth_moment(z.origin->data);
    if (m4 > 16.0 * std::pow(sigma, 4)) {
      diag << "uncorrupted fourth moment " << m4 << " exceeds 16 sigma^4 = " << 16.0 * std::pow(sigma, 4);
      r.diagnostics = diag.str();
      return r;
    }
  }
  const BuiltSystem built = build_system(z, sigma, k);
  if (!built.witness.check.feasible) {
    r.diagnostics = "clean witness infeasible at sigma";
    return r;
  }

  r.value = pe_squared_distance(pe, z.mu_star);
  const double s2 = sigma * sigma;
  const auto [opt, brk] = bounds::for_order(z.epsilon, k);
  r.bounds.push_back(make_check(k == 2 ? "8 eps / delta" : "4k / delta^(2/k)", r.value, "<=", opt * s2, slack));
  r.bounds.push_back(make_check(k == 2 ? "8 eps / delta^2" : "breakdown (2^(2k-1) eps^(k-1) k^(k/2) / delta^k)^(2/k)",
                                r.value, "<=", brk * s2, slack));
  r.status = all_pass(r.bounds) ? BoundStatus::Pass : BoundStatus::Fail;
  return r;
}

}  // namespace rme
