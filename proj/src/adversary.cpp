#include "rme/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rme/law1d.hpp"

namespace rme {
namespace {

void check_eps(double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in [0, 1/2)");
}

// Draws from the part of `b` not covered by `a`, i.e. (b - a)_+ normalized.
class ExcessSampler {
 public:
  ExcessSampler(const Law1D& a, const Law1D& b) : a_(a), b_(b) {
    for (const auto& atom : b.atoms) {
      const double e = std::max(0.0, atom.mass - a.atom_mass(atom.loc));
      if (e > 0.0) {
        atom_locs_.push_back(atom.loc);
        atom_excess_.push_back(e);
        atom_total_ += e;
      }
    }
    const TvResult tv = tv_distance(a, b);
    cont_total_ = std::max(0.0, 0.5 * (tv.cont_l1 + b.continuous_mass() - a.continuous_mass()));
  }

  bool empty() const { return atom_total_ + cont_total_ <= 0.0; }

  double operator()(SplitMix64& rng) const {
    const double u = rng.uniform() * (atom_total_ + cont_total_);
    if (u < atom_total_) {
      double acc = 0.0;
      for (std::size_t i = 0; i < atom_excess_.size(); ++i) {
        acc += atom_excess_[i];
        if (u < acc) return atom_locs_[i];
      }
      return atom_locs_.back();
    }
    // rejection from the continuous part of b
    std::normal_distribution<double> normal(0.0, 1.0);
    const double cb = b_.continuous_mass();
    for (int attempt = 0; attempt < 1000000; ++attempt) {
      double v = rng.uniform() * cb;
      const Law1D::Normal* pick = &b_.normals.back();
      for (const auto& g : b_.normals) {
        if (v < g.weight) {
          pick = &g;
          break;
        }
        v -= g.weight;
      }
      const double x = pick->mean + pick->sd * normal(rng);
      const double fb = b_.density(x);
      const double accept = fb > 0.0 ? std::max(0.0, fb - a_.density(x)) / fb : 0.0;
      if (rng.uniform() < accept) return x;
    }
    throw std::runtime_error("excess sampler failed to accept");
  }

 private:
  const Law1D& a_;
  const Law1D& b_;
  std::vector<double> atom_locs_, atom_excess_;
  double atom_total_ = 0.0, cont_total_ = 0.0;
};

// Probability that a draw x from `a` is part of the mass `a` has in excess of `b`.
double removal_weight(const Law1D& a, const Law1D& b, double x) {
  const double pa = a.atom_mass(x);
  if (pa > 0.0) return std::max(0.0, pa - b.atom_mass(x)) / pa;
  const double fa = a.density(x);
  return fa > 0.0 ? std::max(0.0, fa - b.density(x)) / fa : 0.0;
}

std::vector<int> uniform_subset(int n, int m, const std::vector<int>& exclude, SplitMix64& rng) {
  std::vector<int> pool;
  std::vector<char> banned(n, 0);
  for (int i : exclude) banned[i] = 1;
  for (int i = 0; i < n; ++i)
    if (!banned[i]) pool.push_back(i);
  if (m > static_cast<int>(pool.size())) throw std::logic_error("subset larger than pool");
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(m);
  return pool;
}

void simulate_mixture(const SampleSet& s, const DistributionSpec& alt, int m, SplitMix64& rng,
                      Eigen::MatrixXd& z, std::vector<int>& replaced) {
  if (!s.spec) throw std::invalid_argument("mixture simulation needs the origin's spec");
  if (s.d() != 1) throw std::invalid_argument("mixture simulation is one-dimensional");
  const Law1D d1 = to_law(*s.spec);
  const Law1D d2 = to_law(alt);
  const int n = s.n();

  // 1/2 (D1 + D2) = D1 - tau R1 + tau R2 with tau = TV(D1, D2) / 2
  const double tau = 0.5 * tv_distance(d1, d2).tv;
  const int swaps = std::min(m, static_cast<int>(std::llround(tau * n)));

  // weighted selection without replacement (exponential keys)
  std::vector<std::pair<double, int>> keys;
  for (int i = 0; i < n; ++i) {
    const double w = removal_weight(d1, d2, s.data(i, 0));
    if (w > 0.0) keys.push_back({std::log(rng.uniform() + 1e-300) / w, i});
  }
  std::sort(keys.begin(), keys.end(), std::greater<>());
  std::vector<int> true_swaps;
  for (int i = 0; i < std::min<int>(swaps, keys.size()); ++i) true_swaps.push_back(keys[i].second);
  const int filler = swaps - static_cast<int>(true_swaps.size());
  for (int i : uniform_subset(n, filler, true_swaps, rng)) true_swaps.push_back(i);

  ExcessSampler excess(d1, d2);
  for (int i : true_swaps) z(i, 0) = excess.empty() ? draw(*s.spec, rng)(0) : excess(rng);

  // remaining budget: fresh D1 draws
  std::vector<int> null_swaps = uniform_subset(n, m - swaps, true_swaps, rng);
  for (int i : null_swaps) z(i, 0) = draw(*s.spec, rng)(0);

  replaced = true_swaps;
  replaced.insert(replaced.end(), null_swaps.begin(), null_swaps.end());
}

}  // namespace

double spike_location(double eps, int k) {
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 1/2)");
  if (k < 2 || k % 2) throw std::invalid_argument("k must be even and >= 2");
  return std::sqrt(static_cast<double>(k)) * std::pow(2.0 * eps * (1.0 - 2.0 * eps), -1.0 / k);
}

int corruption_budget(double eps, int n) {
  return static_cast<int>(std::floor(eps * n + 1e-9));
}

int CorruptedSet::retained() const {
  return static_cast<int>(std::count(mask_wstar.begin(), mask_wstar.end(), 1));
}

AdversaryStrategy parse_strategy(const std::string& text, int d) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "identity") return Identity{};
  if (name == "point") {
    std::vector<double> vals;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ';')) vals.push_back(std::stod(item));
    if (vals.empty()) throw std::invalid_argument("point strategy needs a location");
    if (vals.size() != 1 && static_cast<int>(vals.size()) != d)
      throw std::invalid_argument("point location has the wrong dimension");
    Eigen::VectorXd loc = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    if (!loc.allFinite()) throw std::invalid_argument("point location must be finite");
    return ReplaceWithPoint{loc};
  }
  if (name == "spike") {
    ClusterAtScaledSpike c;
    const auto c2 = rest.find(':');
    c.k = rest.empty() ? 2 : std::stoi(rest.substr(0, c2));
    if (c2 != std::string::npos) c.coordinate = std::stoi(rest.substr(c2 + 1));
    if (c.k < 2 || c.k % 2) throw std::invalid_argument("spike k must be even and >= 2");
    if (c.coordinate < 0 || c.coordinate >= d) throw std::invalid_argument("bad coordinate");
    return c;
  }
  if (name == "mixture") return MixtureSimulation{parse_distribution(rest, d)};
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string format_strategy(const AdversaryStrategy& s) {
  std::ostringstream os;
  os.precision(17);
  if (std::holds_alternative<Identity>(s)) {
    os << "identity";
  } else if (const auto* p = std::get_if<ReplaceWithPoint>(&s)) {
    os << "point:";
    for (int j = 0; j < p->location.size(); ++j) os << (j ? ";" : "") << p->location(j);
  } else if (const auto* c = std::get_if<ClusterAtScaledSpike>(&s)) {
    os << "spike:" << c->k << ":" << c->coordinate;
  } else {
    os << "mixture:" << format_distribution(std::get<MixtureSimulation>(s).alt);
  }
  return os.str();
}

CorruptedSet corrupt(const SampleSet& s, double eps, const AdversaryStrategy& strategy,
                     std::uint64_t seed) {
  check_eps(eps);
  const int n = s.n(), d = s.d();
  const int m = std::holds_alternative<Identity>(strategy) ? 0 : corruption_budget(eps, n);
  SplitMix64 rng(seed);

  CorruptedSet out;
  out.z = s.data;
  out.epsilon = eps;
  out.mu_star = s.empirical_mean;
  out.origin = std::make_shared<const SampleSet>(s);
  out.mask_wstar.assign(n, 1);

  std::vector<int> replaced;
  if (m > 0) {
    if (const auto* mix = std::get_if<MixtureSimulation>(&strategy)) {
      simulate_mixture(s, mix->alt, m, rng, out.z, replaced);
    } else {
      replaced = uniform_subset(n, m, {}, rng);
      Eigen::RowVectorXd row(d);
      if (const auto* p = std::get_if<ReplaceWithPoint>(&strategy)) {
        if (p->location.size() == 1) {
          row.setConstant(p->location(0));
        } else if (p->location.size() == d) {
          row = p->location.transpose();
        } else {
          throw std::invalid_argument("point location has the wrong dimension");
        }
      } else {
        const auto& c = std::get<ClusterAtScaledSpike>(strategy);
        if (c.coordinate >= d) throw std::invalid_argument("spike coordinate out of range");
        row = s.true_mean.transpose();
        row(c.coordinate) += spike_location(eps, c.k);
      }
      for (int i : replaced) out.z.row(i) = row;
    }
  }
  for (int i : replaced) out.mask_wstar[i] = 0;
  return out;
}

CorruptedSet mixture_tv_contamination(const DistributionSpec& d1, const DistributionSpec& d2,
                                      double eps, int n, std::uint64_t seed) {
  check_eps(eps);
  const SampleSet s = sample(d1, n, derive_seed(seed, 1));
  return corrupt(s, eps, MixtureSimulation{d2}, derive_seed(seed, 2));
}

}  // namespace rme
