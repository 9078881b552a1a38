#include "rme/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rme/rng.hpp"

namespace rme {
namespace {

class Tally {
 public:
  explicit Tally(std::string name) { e_.name = std::move(name); }
  // records lhs <= rhs
  void le(double lhs, double rhs) {
    ++e_.trials;
    const double excess = (lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    e_.worst = e_.trials == 1 ? excess : std::max(e_.worst, excess);
    if (!(excess <= kToolkitSlack)) ++e_.violations;
  }
  ToolkitEntry done() const { return e_; }

 private:
  ToolkitEntry e_;
};

struct Gen {
  SplitMix64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  double gauss() { return normal(rng); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }
  // heavy-ish scale so inputs span several magnitudes
  double scaled() { return gauss() * std::pow(10.0, uniform(-2.0, 2.0)); }
};

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

ToolkitEntry cauchy_schwarz(Gen& g, long trials) {
  Tally t("Cauchy-Schwarz");
  for (long s = 0; s < trials; ++s) {
    const int n = g.integer(1, 12);
    double ab = 0, aa = 0, bb = 0;
    for (int i = 0; i < n; ++i) {
      const double a = g.scaled(), b = g.scaled();
      ab += a * b;
      aa += a * a;
      bb += b * b;
    }
    t.le(ab * ab, aa * bb);
  }
  // parallel vectors: equality
  t.le(ipow(1 * 2 + 2 * 4 + 3 * 6, 2), (1 + 4 + 9) * (4 + 16 + 36.0));
  return t.done();
}

ToolkitEntry hoelder(Gen& g, long trials, int k) {
  Tally t("Hoelder k=" + std::to_string(k) + " (boolean w)");
  for (long s = 0; s < trials; ++s) {
    const int n = g.integer(1, 12);
    double wb = 0, w = 0, bk = 0;
    for (int i = 0; i < n; ++i) {
      const double wi = g.rng() % 2 ? 1.0 : 0.0;
      const double b = g.scaled();
      wb += wi * b;
      w += wi;
      bk += ipow(b, k);
    }
    t.le(ipow(wb, k), ipow(w, k - 1) * bk);
  }
  // all w = 1 and constant b: equality
  t.le(ipow(3 * 1.5, k), ipow(3, k - 1) * 3 * ipow(1.5, k));
  return t.done();
}

ToolkitEntry am_gm(Gen& g, long trials) {
  Tally t("AM-GM");
  for (long s = 0; s < trials; ++s) {
    const int m = g.integer(2, 6);
    double prod = 1.0, sum = 0.0;
    for (int i = 0; i < m; ++i) {
      const double q = g.gauss() * std::pow(10.0, g.uniform(-1.0, 1.0));
      const double wi = q * q;  // a square, hence SoS
      prod *= wi;
      sum += ipow(wi, m);
    }
    t.le(prod, sum / m);
  }
  t.le(ipow(2.0, 4), 4 * ipow(2.0, 4) / 4);  // all equal: equality
  return t.done();
}

ToolkitEntry triangle(Gen& g, long trials) {
  Tally t("Triangle");
  for (long s = 0; s < trials; ++s) {
    const int e = 2 * g.integer(1, 4);
    const double a = g.scaled(), b = g.scaled();
    t.le(ipow(a + b, e), std::ldexp(1.0, e - 1) * (ipow(a, e) + ipow(b, e)));
  }
  t.le(ipow(1.0 + 1.0, 4), 8.0 * (1.0 + 1.0));  // a = b = 1, t = 4: 16 <= 16
  return t.done();
}

ToolkitEntry cancellation(Gen& g, long trials) {
  Tally t("Cancellation");
  long done = 0;
  while (done < trials) {
    const double c = std::pow(10.0, g.uniform(-3.0, 3.0));
    const double x = g.uniform(-0.5, 1.5) * c;
    if (!(x * x <= c * x)) continue;  // side condition X^2 <= C X
    t.le(x, c);
    ++done;
  }
  t.le(3.0, 3.0);  // X = C = 3: X^2 = C X holds with equality
  return t.done();
}

ToolkitEntry square_root(Gen& g, long trials) {
  Tally t("Square Root");
  long done = 0;
  while (done < trials) {
    const int k = 1 << g.integer(1, 3);
    const double c = std::pow(10.0, g.uniform(-3.0, 3.0));
    const double root = std::pow(c, 1.0 / k);
    const double x = g.uniform(-1.5, 1.5) * root;
    if (!(ipow(x, k) <= c)) continue;  // side condition X^k <= C
    t.le(x, root);
    ++done;
  }
  t.le(std::pow(16.0, 0.25), 2.0);
  return t.done();
}

// ||v||^2 <= (2/k) ||v||^k / C^(k-2) + ((k-2)/k) C^2, k even >= 4
ToolkitEntry power_of_two(Gen& g, long trials) {
  Tally t("power-of-2 reduction");
  auto check = [&](double nv, double c, int k) {
    t.le(nv * nv, 2.0 / k * ipow(nv, k) / ipow(c, k - 2) + (k - 2.0) / k * c * c);
  };
  for (long s = 0; s < trials; ++s) {
    const int k = 2 * g.integer(2, 4);
    const int d = g.integer(1, 6);
    double nv2 = 0.0;
    for (int i = 0; i < d; ++i) nv2 += ipow(g.gauss(), 2);
    const double c = std::pow(10.0, g.uniform(-1.0, 1.0));
    check(std::sqrt(nv2) * std::pow(10.0, g.uniform(-1.0, 1.0)), c, k);
  }
  check(2.0, 2.0, 4);  // ||v|| = C: equality
  return t.done();
}

// (A)(B) >= 0 with A = ((1/n) sum w w*)^(k-1) and
// B = 2^k k^(k/2) |mu - mu*|^k - ((1/n) sum w w*) |mu - mu*|^(2k), whenever A >= 0 and B >= 0
// hold at a random assignment feasible for the 1-D system with moment bound k^(k/2).
ToolkitEntry factored(Gen& g, long trials) {
  Tally t("factored certificate (A)(B) >= 0");
  long done = 0, attempts = 0;
  while (done < trials) {
    if (++attempts > 1000 * trials) throw std::runtime_error("factored check: no feasible draws");
    const int k = g.integer(1, 2) * 2;
    const double kk = std::pow(k, k / 2.0);
    const int n = g.integer(4, 16);
    const double eps = g.uniform(0.0, 0.49);
    const int bad = static_cast<int>(std::floor(eps * n + 1e-9));

    std::vector<double> xs(n);
    double mean_s = 0.0;
    for (auto& x : xs) mean_s += (x = g.gauss());
    mean_s /= n;
    double mom = 0.0;
    for (double x : xs) mom += ipow(x - mean_s, k) / n;
    if (mom <= 0.0) continue;
    const double scale = std::pow(g.uniform(0.1, 1.0) * kk / mom, 1.0 / k);
    for (auto& x : xs) x = (x - mean_s) * scale;  // mu* = 0, k-th moment below k^(k/2)

    std::vector<double> z = xs;
    std::vector<int> wstar(n, 1);
    for (int i = 0; i < bad; ++i) {
      z[i] = g.uniform(-1.0, 1.0) * std::pow(10.0, g.uniform(0.0, 1.0));
      wstar[i] = 0;
    }
    // w: a random subset of at least (1 - eps) n rows
    std::vector<int> w(n, 0), idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), g.rng);
    const int keep = std::min(n, n - bad + g.integer(0, bad));
    for (int i = 0; i < keep; ++i) w[idx[i]] = 1;

    // x_i = z_i where w_i = 1; the rest sit at the mean of the selected rows, so mu equals it
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += w[i] * z[i];
    mu /= keep;
    double moment = 0.0;
    for (int i = 0; i < n; ++i) moment += w[i] * ipow(z[i] - mu, k) / n;
    if (moment > kk) continue;  // infeasible draw

    double overlap = 0.0;
    for (int i = 0; i < n; ++i) overlap += static_cast<double>(w[i] * wstar[i]) / n;
    const double a = ipow(overlap, k - 1);
    const double dist = std::abs(mu);
    const double b = std::ldexp(1.0, k) * kk * ipow(dist, k) - overlap * ipow(dist, 2 * k);
    const double ref = std::max(std::ldexp(1.0, k) * kk * ipow(dist, k), overlap * ipow(dist, 2 * k));
    // per-factor inequalities first, then the product
    t.le(-a, 0.0);
    t.le(-b / std::max(1.0, ref), 0.0);
    if (a >= 0.0 && b >= 0.0) t.le(-(a * b) / std::max(1.0, a * ref), 0.0);
    ++done;
  }
  return t.done();
}

}  // namespace

ToolkitReport toolkit_suite(long trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  Gen g{SplitMix64(seed)};
  ToolkitReport r;
  r.entries.push_back(cauchy_schwarz(g, trials));
  for (int k : {2, 4, 8}) r.entries.push_back(hoelder(g, trials, k));
  r.entries.push_back(am_gm(g, trials));
  r.entries.push_back(triangle(g, trials));
  r.entries.push_back(cancellation(g, trials));
  r.entries.push_back(square_root(g, trials));
  r.entries.push_back(power_of_two(g, trials));
  r.entries.push_back(factored(g, trials));
  return r;
}

}  // namespace rme
