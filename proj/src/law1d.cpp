#include "rme/law1d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/tools/roots.hpp>

namespace rme {
namespace {

double normal_pdf(double x, double mean, double sd) {
  const double t = (x - mean) / sd;
  return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// E[Z^j] for standard normal Z
double std_normal_moment(int j) {
  if (j % 2) return 0.0;
  double m = 1.0;
  for (int i = j - 1; i > 1; i -= 2) m *= i;
  return m;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double Law1D::density(double x) const {
  double f = 0.0;
  for (const auto& g : normals) f += g.weight * normal_pdf(x, g.mean, g.sd);
  return f;
}

double Law1D::atom_mass(double x) const {
  double m = 0.0;
  for (const auto& a : atoms)
    if (a.loc == x) m += a.mass;
  return m;
}

double Law1D::continuous_mass() const {
  double m = 0.0;
  for (const auto& g : normals) m += g.weight;
  return m;
}

double Law1D::mean() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.mass * a.loc;
  for (const auto& g : normals) m += g.weight * g.mean;
  return m;
}

double Law1D::central_moment(int k) const {
  const double c = mean();
  double total = 0.0;
  for (const auto& a : atoms) total += a.mass * std::pow(a.loc - c, k);
  for (const auto& g : normals) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) {
      s += boost::math::binomial_coefficient<double>(k, j) * std::pow(g.mean - c, k - j) *
           std::pow(g.sd, j) * std_normal_moment(j);
    }
    total += g.weight * s;
  }
  return total;
}

Law1D to_law(const DistributionSpec& spec) {
  validate(spec);
  Law1D law;
  if (const auto* g = std::get_if<GaussianIdentity>(&spec)) {
    if (g->mean.size() != 1) throw std::invalid_argument("law requires d = 1");
    law.normals.push_back({1.0, g->mean(0), 1.0});
  } else if (const auto* b = std::get_if<BoundedCovariance>(&spec)) {
    if (b->mean.size() != 1 || b->shape != CovShape::GaussianScaled)
      throw std::invalid_argument("law requires a 1-D gaussian-scaled spec");
    law.normals.push_back({1.0, b->mean(0), b->sigma});
  } else if (const auto* t = std::get_if<TwoPointMixture>(&spec)) {
    if (t->spike_prob < 1.0) law.atoms.push_back({t->base, 1.0 - t->spike_prob});
    if (t->spike_prob > 0.0) law.atoms.push_back({t->spike_location, t->spike_prob});
  } else if (const auto* s = std::get_if<GaussianWithSpike>(&spec)) {
    if (s->spike_prob < 1.0) law.normals.push_back({1.0 - s->spike_prob, s->base, 1.0});
    if (s->spike_prob > 0.0) law.atoms.push_back({s->spike_location, s->spike_prob});
  }
  return law;
}

TvResult tv_distance(const Law1D& a, const Law1D& b) {
  // atoms: exact mass accounting over the union of locations
  std::vector<double> locs;
  for (const auto& x : a.atoms) locs.push_back(x.loc);
  for (const auto& x : b.atoms) locs.push_back(x.loc);
  std::sort(locs.begin(), locs.end());
  locs.erase(std::unique(locs.begin(), locs.end()), locs.end());
  double atom_part = 0.0;
  for (double x : locs) atom_part += std::abs(a.atom_mass(x) - b.atom_mass(x));

  double cont_part = 0.0;
  if (!a.normals.empty() || !b.normals.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* law : {&a, &b})
      for (const auto& g : law->normals) {
        lo = std::min(lo, g.mean - 40.0 * g.sd);
        hi = std::max(hi, g.mean + 40.0 * g.sd);
      }
    auto diff = [&](double x) { return a.density(x) - b.density(x); };
    // split at sign changes of f_a - f_b so each piece is smooth
    std::vector<double> cuts{lo};
    const int grid = 4000;
    double prev_x = lo, prev_f = diff(lo);
    for (int i = 1; i <= grid; ++i) {
      const double x = lo + (hi - lo) * i / grid;
      const double f = diff(x);
      if (f == 0.0) {
        cuts.push_back(x);  // crossing exactly on the grid
      } else if ((prev_f < 0.0 && f > 0.0) || (prev_f > 0.0 && f < 0.0)) {
        boost::uintmax_t iters = 200;
        auto tol = boost::math::tools::eps_tolerance<double>(52);
        auto root = boost::math::tools::toms748_solve(diff, prev_x, x, prev_f, f, tol, iters);
        cuts.push_back(0.5 * (root.first + root.second));
      }
      prev_x = x;
      prev_f = f;
    }
    cuts.push_back(hi);
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      double err = 0.0;
      cont_part += std::abs(GK::integrate(diff, cuts[i], cuts[i + 1], 15, 1e-14, &err));
    }
  }

  TvResult r;
  r.tv = std::clamp(0.5 * (atom_part + cont_part), 0.0, 1.0);
  r.overlap = 1.0 - r.tv;
  r.atom_l1 = atom_part;
  r.cont_l1 = cont_part;
  return r;
}

}  // namespace rme
