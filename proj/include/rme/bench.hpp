#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rme/relax.hpp"

namespace rme {

// Key-value text file, one `key = value` per line, `#` starts a comment.
//   dist        distribution spec string (see parse_distribution)      [gaussian]
//   strategy    adversary strategy string (see parse_strategy)          [point:10]
//   eps         comma-separated grid in [0, 1/2)                        [required]
//   n, d, k, r  sample size, dimension, moment order, relaxation order  [40, 2, 2, 2]
//   basis       full | wlinear                                          [wlinear]
//   trials      trials per grid point                                   [20]
//   seed        base seed; trial t uses seed + t                        [1]
//   sigma       moment-bound scale passed to the SoS estimator          [1]
//   tol         solver tolerance                                        [1e-6]
//   max_iter    solver iteration cap                                    [50000]
//   estimators  comma-separated subset of sos,mean,median,geomedian,gauss1d  [sos,mean]
//   timing      record wall-clock seconds (otherwise 0, for byte-identical output)  [false]
//   gauss1d_halfwidth, gauss1d_step   grid of the 1-D projection estimator  [10, 0.01]
struct ExperimentConfig {
  std::string dist = "gaussian";
  std::string strategy = "point:10";
  std::vector<double> eps;
  int n = 40;
  int d = 2;
  int k = 2;
  int r = 2;
  BasisKind basis = BasisKind::WLinear;
  int trials = 20;
  std::uint64_t seed = 1;
  double sigma = 1.0;
  double tol = 1e-6;
  int max_iter = 50000;
  std::vector<std::string> estimators = {"sos", "mean"};
  bool timing = false;
  double gauss1d_halfwidth = 10.0;
  double gauss1d_step = 0.01;
};

// Throws std::invalid_argument naming the offending key or value.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& cfg);

struct ExperimentRow {
  double eps = 0.0;
  int trial = 0;
  std::string estimator;
  double error = 0.0;  // NaN when the estimator produced no estimate
  double bound_optimal = 0.0;
  double bound_breakdown = 0.0;
  double residual_eq = 0.0;   // NaN for estimators without a solver
  double residual_psd = 0.0;  // NaN for estimators without a solver
  double seconds = 0.0;
  std::string status;  // ok, not_converged, infeasible, failed
};

struct GroupSummary {
  double eps = 0.0;
  std::string estimator;
  int rows = 0;
  int failures = 0;  // rows whose status is not ok
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ExperimentRow> rows;  // ordered by (eps, trial, estimator)
  std::vector<GroupSummary> summarize() const;  // over finite errors, ordered by (eps, estimator)
};

ExperimentReport run_sweep(const ExperimentConfig& cfg);

// Quantile with linear interpolation between order statistics; q in [0, 1].
double quantile(std::vector<double> v, double q);

// sqrt(eps / (1 - 2 eps)) for k = 2, sqrt(k) / delta^(1/k) for k = 4.
double theory_rate(double eps, int k);

struct RatePair {
  double eps_a = 0.0;
  double eps_b = 0.0;
  double empirical = 0.0;  // median(b) / median(a)
  double theory = 0.0;     // theory_rate(b) / theory_rate(a)
  double ratio() const { return empirical / theory; }
  bool within() const { return ratio() >= 0.5 && ratio() <= 2.0; }
};

struct RateFit {
  std::vector<RatePair> pairs;
  bool pass() const;
};

// Pairs every grid point with the anchor, or every grid pair a < b without one.
// Throws std::invalid_argument with fewer than 2 grid points, fewer than 10 finite
// errors at any grid point, or eps = 0 in the grid.
RateFit fit_rate(const ExperimentReport& report, const std::string& estimator,
                 std::optional<double> anchor = std::nullopt);

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report);
std::string summary_json(const ExperimentReport& report);

}  // namespace rme
