#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "rme/rng.hpp"

namespace rme {

struct GaussianIdentity {
  Eigen::VectorXd mean;  // N(mean, I_d)
};

enum class CovShape { GaussianScaled, UniformBall };

// Population covariance is exactly sigma^2 I for both shapes.
struct BoundedCovariance {
  Eigen::VectorXd mean;
  double sigma = 1.0;
  CovShape shape = CovShape::GaussianScaled;
};

// 1-D: point mass at `base` w.p. 1-p, point mass at `spike_location` w.p. p.
struct TwoPointMixture {
  double base = 0.0;
  double spike_location = 0.0;
  double spike_prob = 0.0;
};

// 1-D: N(base, 1) w.p. 1-p, point mass at `spike_location` w.p. p.
// Needed for the Gaussian-vs-bounded-covariance pairs.
struct GaussianWithSpike {
  double base = 0.0;
  double spike_location = 0.0;
  double spike_prob = 0.0;
};

using DistributionSpec =
    std::variant<GaussianIdentity, BoundedCovariance, TwoPointMixture, GaussianWithSpike>;

void validate(const DistributionSpec& spec);
int dimension(const DistributionSpec& spec);
Eigen::VectorXd population_mean(const DistributionSpec& spec);

// One draw from spec.
Eigen::VectorXd draw(const DistributionSpec& spec, SplitMix64& rng);

// Spec strings: `gaussian[:mean=M]`, `boundedcov:sigma=S[,shape=gaussian|ball][,mean=M]`,
// `twopoint:spike=S,prob=P[,base=B]`, `gaussspike:spike=S,prob=P[,base=B]`.
// M is a scalar (broadcast to d) or a ';'-separated list of length d.
DistributionSpec parse_distribution(const std::string& text, int d);
std::string format_distribution(const DistributionSpec& spec);

struct SampleSet {
  Eigen::MatrixXd data;  // n x d
  Eigen::VectorXd true_mean;
  Eigen::VectorXd empirical_mean;
  std::uint64_t seed = 0;
  std::optional<DistributionSpec> spec;

  int n() const { return static_cast<int>(data.rows()); }
  int d() const { return static_cast<int>(data.cols()); }
};

SampleSet sample(const DistributionSpec& spec, int n, std::uint64_t seed);

// Wraps externally supplied data; empirical_mean is recomputed.
SampleSet make_sample_set(Eigen::MatrixXd data, Eigen::VectorXd true_mean, std::uint64_t seed,
                          std::optional<DistributionSpec> spec = std::nullopt);

double empirical_covariance_opnorm(const SampleSet& s);
// Largest eigenvalue of (1/n) sum (x_i - xbar)(x_i - xbar)^T for the rows of x.
double covariance_opnorm(const Eigen::MatrixXd& x);

}  // namespace rme
