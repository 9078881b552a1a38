#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rme/synth.hpp"

namespace rme {

struct Identity {};

struct ReplaceWithPoint {
  Eigen::VectorXd location;  // size 1 broadcasts to every coordinate
};

// Replaced rows are drawn so that the observed set looks like 1/2 (D1 + alt),
// where D1 is the origin's spec. One-dimensional only.
struct MixtureSimulation {
  DistributionSpec alt;
};

// Replaced rows sit at true_mean + spike_location(eps, k) * e_coordinate.
struct ClusterAtScaledSpike {
  int k = 2;
  int coordinate = 0;
};

using AdversaryStrategy =
    std::variant<Identity, ReplaceWithPoint, MixtureSimulation, ClusterAtScaledSpike>;

// `identity`, `point:R` or `point:R1;R2;..`, `spike:K[:coord]`, `mixture:<distribution spec>`.
AdversaryStrategy parse_strategy(const std::string& text, int d);
std::string format_strategy(const AdversaryStrategy& s);

// sqrt(k) * (2 eps (1 - 2 eps))^(-1/k)
double spike_location(double eps, int k);

struct CorruptedSet {
  Eigen::MatrixXd z;
  std::vector<std::uint8_t> mask_wstar;  // 1 = untouched row
  double epsilon = 0.0;
  Eigen::VectorXd mu_star;  // empirical mean of the origin sample
  std::shared_ptr<const SampleSet> origin;

  int n() const { return static_cast<int>(z.rows()); }
  int d() const { return static_cast<int>(z.cols()); }
  int retained() const;
};

// floor(eps * n) guarded against representation error in eps
int corruption_budget(double eps, int n);

CorruptedSet corrupt(const SampleSet& s, double eps, const AdversaryStrategy& strategy,
                     std::uint64_t seed);

CorruptedSet mixture_tv_contamination(const DistributionSpec& d1, const DistributionSpec& d2,
                                      double eps, int n, std::uint64_t seed);

}  // namespace rme
