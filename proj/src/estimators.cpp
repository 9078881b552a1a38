#include "rme/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "rme/law1d.hpp"

namespace rme {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void finish(EstimateReport& r, const CorruptedSet& z, Clock::time_point t0) {
  if (z.mu_star.size() == r.mu_hat.size()) r.error = (r.mu_hat - z.mu_star).norm();
  r.seconds = seconds_since(t0);
}

}  // namespace

Eigen::VectorXd column_lower_median(const Eigen::MatrixXd& z) {
  Eigen::VectorXd m(z.cols());
  std::vector<double> col(z.rows());
  for (int j = 0; j < z.cols(); ++j) {
    for (int i = 0; i < z.rows(); ++i) col[i] = z(i, j);
    const auto mid = col.begin() + (col.size() - 1) / 2;
    std::nth_element(col.begin(), mid, col.end());
    m(j) = *mid;
  }
  return m;
}

SosSolve sos_solve(const CorruptedSet& zset, double sigma, int k, int r, const SosOptions& opt) {
  const auto t0 = Clock::now();
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(opt.slack > 0.0)) throw std::invalid_argument("slack must be positive");
  const int n = zset.n();
  const Eigen::VectorXd center = column_lower_median(zset.z);
  const double scale = opt.slack * sigma;

  CorruptedSet normalized = zset;
  normalized.z = (zset.z.rowwise() - center.transpose()) / scale;
  normalized.mu_star = (zset.mu_star.size() == zset.d())
                           ? Eigen::VectorXd((zset.mu_star - center) / scale)
                           : Eigen::VectorXd();
  normalized.origin.reset();

  BuiltSystem built = build_system(normalized, 1.0, k);
  SosSolve out;
  out.report.witness_feasible = built.witness.check.feasible;
  if (opt.tighten_mass) {
    // sum w = m with m = ceil((1-eps) n); scaled by 1/n like the inequality it replaces
    const double m = n - corruption_budget(zset.epsilon, n);
    Polynomial h(-m / n);
    for (int i = 0; i < n; ++i) h += (1.0 / n) * Polynomial::variable(built.system.w(i));
    built.system.inequalities.clear();
    built.system.equalities.push_back(h);
  }
  out.relaxation = compile(built.system, r, opt.basis);
  out.result = solve(out.relaxation, {}, opt.solver);
  out.result.pe.frame_center = center;
  out.result.pe.frame_scale = scale;
  out.system = std::move(built.system);

  EstimateReport& rep = out.report;
  rep.estimator = "sos";
  rep.sigma_used = scale;
  rep.status = out.result.status;
  rep.residuals = out.result.pe.residuals;
  rep.mu_hat = pe_mean(out.result.pe);
  finish(rep, zset, t0);
  if (out.result.status != SolveStatus::Converged)
    throw EstimationError(std::string("sos solver ") + to_string(out.result.status) +
                              " after " + std::to_string(rep.residuals->iterations) +
                              " iterations (psd slack " + std::to_string(rep.residuals->psd_slack) +
                              ")",
                          rep);
  return out;
}

EstimateReport sos_mean(const CorruptedSet& z, double sigma, int k, int r, const SosOptions& opt) {
  return sos_solve(z, sigma, k, r, opt).report;
}

EstimateReport sample_mean(const CorruptedSet& z) {
  const auto t0 = Clock::now();
  EstimateReport r;
  r.estimator = "mean";
  r.mu_hat = z.z.colwise().mean().transpose();
  finish(r, z, t0);
  return r;
}

EstimateReport coordinate_median(const CorruptedSet& z) {
  const auto t0 = Clock::now();
  EstimateReport r;
  r.estimator = "median";
  r.mu_hat = column_lower_median(z.z);
  finish(r, z, t0);
  return r;
}

EstimateReport geometric_median(const CorruptedSet& zset, double tol, int max_iter) {
  const auto t0 = Clock::now();
  const Eigen::MatrixXd& z = zset.z;
  const int n = zset.n(), d = zset.d();
  EstimateReport r;
  r.estimator = "geomedian";

  const double spread = 1.0 + z.cwiseAbs().maxCoeff();
  const double anchor_tol = 1e-12 * spread;
  Eigen::VectorXd mu = z.colwise().mean().transpose();
  bool all_same = true;
  for (int i = 1; i < n && all_same; ++i) all_same = z.row(i) == z.row(0);
  if (all_same) {
    r.mu_hat = z.row(0).transpose();
    finish(r, zset, t0);
    return r;
  }

  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd pull = Eigen::VectorXd::Zero(d);  // minus the gradient away from anchors
    double den = 0.0;
    int coincident = 0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd diff = z.row(i).transpose() - mu;
      const double dist = diff.norm();
      if (dist <= anchor_tol) {
        ++coincident;
        continue;
      }
      num += z.row(i).transpose() / dist;
      den += 1.0 / dist;
      pull += diff / dist;
    }
    const double pull_norm = pull.norm();
    r.iterations = it;
    if (coincident == 0 && pull_norm <= tol * n) break;
    // at a data point: optimal iff the pull of the others is at most its multiplicity
    if (coincident > 0 && pull_norm <= coincident * (1.0 + tol)) break;

    Eigen::VectorXd next = num / den;
    if (coincident > 0) {
      const double t = std::min(1.0, coincident / pull_norm);
      next = (1.0 - t) * next + t * mu;
    }
    const double step = (next - mu).norm();
    mu = next;
    if (step <= 1e-15 * spread) break;
    if (it == max_iter) {
      r.mu_hat = mu;
      finish(r, zset, t0);
      throw EstimationError("geometric median did not converge", r);
    }
  }
  r.mu_hat = mu;
  finish(r, zset, t0);
  return r;
}

double kolmogorov_distance_to_normal(const Eigen::VectorXd& sorted_z, double mu) {
  const int n = static_cast<int>(sorted_z.size());
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf(sorted_z(i) - mu);
    best = std::max({best, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return best;
}

EstimateReport gaussian_projection_1d(const Eigen::VectorXd& z, double grid_halfwidth,
                                      double grid_step, std::optional<double> mu_star) {
  const auto t0 = Clock::now();
  if (z.size() == 0) throw std::invalid_argument("empty sample");
  if (!(grid_step > 0.0) || !(grid_halfwidth >= 0.0)) throw std::invalid_argument("empty grid");
  Eigen::VectorXd sorted = z;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double center = sorted((sorted.size() - 1) / 2);
  const long half = static_cast<long>(std::floor(grid_halfwidth / grid_step + 1e-9));

  double best_mu = center, best = std::numeric_limits<double>::infinity();
  for (long j = -half; j <= half; ++j) {
    const double mu = center + j * grid_step;
    const double dist = kolmogorov_distance_to_normal(sorted, mu);
    if (dist < best) {
      best = dist;
      best_mu = mu;
    }
  }
  EstimateReport r;
  r.estimator = "gauss1d";
  r.mu_hat = Eigen::VectorXd::Constant(1, best_mu);
  if (mu_star) r.error = std::abs(best_mu - *mu_star);
  r.seconds = seconds_since(t0);
  return r;
}

namespace {
std::vector<int> top_k(const Eigen::VectorXd& x, int k) {
  if (k < 1 || k > x.size()) throw std::invalid_argument("k out of range");
  std::vector<int> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(x(a)) > std::abs(x(b)); });
  idx.resize(k);
  return idx;
}
}  // namespace

Eigen::VectorXd sparse_truncate(const Eigen::VectorXd& x, int k) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (int i : top_k(x, k)) out(i) = x(i);
  return out;
}

double norm_2k(const Eigen::VectorXd& x, int k) {
  double s = 0.0;
  for (int i : top_k(x, k)) s += x(i) * x(i);
  return std::sqrt(s);
}

}  // namespace rme
