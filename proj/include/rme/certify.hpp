#pragma once

#include <limits>
#include <string>
#include <vector>

#include "rme/adversary.hpp"
#include "rme/law1d.hpp"
#include "rme/sdp.hpp"
#include "rme/synth.hpp"

namespace rme {

// One numeric claim: value `relation` reference, within tol.
struct Check {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  std::string relation;  // "==", "<=", ">="
  double tol = 0.0;
  bool pass = false;
};

Check make_check(std::string name, double value, std::string relation, double reference,
                 double tol);
bool all_pass(const std::vector<Check>& checks);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LowerBoundPair {
  std::string family;  // moment | gaussian | gauss-vs-cov:large | gauss-vs-cov:small
  DistributionSpec d1, d2;
  double eps = 0.0;
  int k = 0;  // 0 when no moment order applies
  // closed forms
  double tv = 0.0;
  double mean_gap = 0.0;
  double kth_central_moment_d2 = kNaN;
  double variance_d2 = kNaN;
  // closed forms against the generic law computations, and the claimed inequalities
  std::vector<Check> checks;
  bool pass() const { return all_pass(checks); }
};

LowerBoundPair lb_bounded_moment_pair(double eps, int k);
LowerBoundPair lb_gaussian_pair(double eps);
enum class Regime { Large, Small };
Regime parse_regime(const std::string& s);
LowerBoundPair lb_gauss_vs_bounded_cov(double eps, Regime regime);

// Equal-variance normal pairs use 2 Phi(|gap| / 2 sd) - 1, cross-checked by the integrator
// (the difference is reported in `cross_check`); everything else goes through the law.
struct TvReport {
  double tv = 0.0;
  double overlap = 1.0;
  double cross_check = 0.0;  // |closed form - integrated| when a closed form was used
  bool closed_form = false;
};
TvReport tv_distance(const DistributionSpec& a, const DistributionSpec& b);

// w must be exactly 0/1 with sum w >= (1 - eps) n, otherwise std::invalid_argument.
struct FeasibilityReport {
  std::vector<Check> checks;
  bool pass() const { return all_pass(checks); }
};
FeasibilityReport check_feasibility_identities(const CorruptedSet& z, const std::vector<double>& w);

// Theory error bounds; squared-norm forms unless noted. delta = 1 - 2 eps.
namespace bounds {
double bcov_optimal(double eps);                   // 8 eps / delta
double bcov_breakdown(double eps);                 // 8 eps / delta^2
double moment_optimal(double eps, int k);          // 4k / delta^(2/k)
double moment_breakdown(double eps, int k);        // (2^(2k-1) eps^(k-1) k^(k/2) / delta^k)^(2/k)
double sparse_breakdown(double eps, int t, double m);  // 2^(2-1/t) eps^(1-1/t) M^(1/t) / delta, not squared
double gaussian(double eps);                       // sqrt(ln(1/delta)), not squared
// The pair a sweep row reports for moment order k: (optimal, breakdown).
std::pair<double, double> for_order(double eps, int k);
}  // namespace bounds

enum class BoundStatus { Pass, Fail, Skipped };
const char* to_string(BoundStatus s);

struct PeBoundReport {
  BoundStatus status = BoundStatus::Skipped;
  double value = kNaN;  // E~[||mu - mu*||^2]
  std::vector<Check> bounds;
  std::string diagnostics;
  std::string advisory;
};

// Preconditions, in order: the uncorrupted sample's k-th moment bound at sigma (k = 2:
// covariance op-norm <= sigma^2; k = 4: directional fourth moment <= 16 sigma^4), then
// feasibility of the clean witness. A failing precondition yields Skipped.
PeBoundReport check_pe_error_bound(const PseudoExpectation& pe, const CorruptedSet& z, double sigma,
                                   int k, double slack);

// max over unit v of (1/n) sum <x_i - mean, v>^4; exact for d = 1, grid of 3600 directions for d = 2.
double directional_fourth_moment(const Eigen::MatrixXd& x);

}  // namespace rme
