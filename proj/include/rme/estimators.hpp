#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rme/adversary.hpp"
#include "rme/sdp.hpp"

namespace rme {

struct EstimateReport {
  std::string estimator;
  Eigen::VectorXd mu_hat;
  double error = std::numeric_limits<double>::quiet_NaN();  // ||mu_hat - mu*||, NaN if mu* unknown
  double seconds = 0.0;
  // SoS only
  std::optional<Residuals> residuals;
  std::optional<SolveStatus> status;
  double sigma_used = 0.0;
  bool witness_feasible = false;
  // geometric median only
  int iterations = 0;
};

class EstimationError : public std::runtime_error {
 public:
  EstimationError(const std::string& what, EstimateReport partial)
      : std::runtime_error(what), report_(std::move(partial)) {}
  const EstimateReport& report() const { return report_; }

 private:
  EstimateReport report_;
};

struct SosOptions {
  double slack = 1.1;  // sigma is inflated by this factor before building the system
  SolverOptions solver;
  // Solve with sum w = ceil((1-eps) n) in place of the mass inequality. The result
  // is still a pseudo-expectation of the inequality system (see README).
  bool tighten_mass = true;
  BasisKind basis = BasisKind::Full;
};

struct SosSolve {
  EstimateReport report;
  SolveResult result;
  MomentRelaxation relaxation;
  PolynomialSystem system;  // normalized coordinates
};

// Works in coordinates (z - median) / (slack sigma); the pe records that frame.
// Throws EstimationError when the solver does not converge.
SosSolve sos_solve(const CorruptedSet& z, double sigma, int k, int r, const SosOptions& opt = {});
EstimateReport sos_mean(const CorruptedSet& z, double sigma, int k, int r,
                        const SosOptions& opt = {});

EstimateReport sample_mean(const CorruptedSet& z);
EstimateReport coordinate_median(const CorruptedSet& z);  // lower median for even n
// Weiszfeld with the Vardi-Zhang step at data points. Throws EstimationError after max_iter.
EstimateReport geometric_median(const CorruptedSet& z, double tol = 1e-10, int max_iter = 100000);
// Grid centred at the lower median of z.
EstimateReport gaussian_projection_1d(const Eigen::VectorXd& z, double grid_halfwidth,
                                      double grid_step,
                                      std::optional<double> mu_star = std::nullopt);
double kolmogorov_distance_to_normal(const Eigen::VectorXd& sorted_z, double mu);

Eigen::VectorXd sparse_truncate(const Eigen::VectorXd& x, int k);
double norm_2k(const Eigen::VectorXd& x, int k);

// Lower median of each column.
Eigen::VectorXd column_lower_median(const Eigen::MatrixXd& z);

}  // namespace rme
