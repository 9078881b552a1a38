#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "rme/adversary.hpp"
#include "rme/synth.hpp"

namespace rme {

// CSV with header x0,...,x{d-1}; values written with %.17g so they round-trip.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Sidecar of a data file: same stem, .json extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

// Sidecar keys: kind, spec (if known), seed, true_mean, empirical_mean.
void save_sample(const std::filesystem::path& csv, const SampleSet& s);
SampleSet load_sample(const std::filesystem::path& csv);

// Sidecar keys: kind, epsilon, mask_wstar, mu_star, strategy, seed, origin.
// A sidecar-less CSV loads with an all-ones mask, epsilon 0 and no mu_star.
void save_corrupted(const std::filesystem::path& csv, const CorruptedSet& z,
                    const std::string& strategy, std::uint64_t seed,
                    const std::filesystem::path& origin);
CorruptedSet load_corrupted(const std::filesystem::path& csv);

}  // namespace rme
