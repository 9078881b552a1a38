#include "rme/synth.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rme {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_prob(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("spike_prob must lie in [0,1]");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

Eigen::VectorXd parse_vector(const std::string& s, int d) {
  auto parts = split(s, ';');
  if (parts.size() == 1) return Eigen::VectorXd::Constant(d, to_double(parts[0]));
  if (static_cast<int>(parts.size()) != d)
    throw std::invalid_argument("mean has " + std::to_string(parts.size()) + " entries, d=" +
                                std::to_string(d));
  Eigen::VectorXd v(d);
  for (int j = 0; j < d; ++j) v(j) = to_double(parts[j]);
  return v;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(17);
  for (int j = 0; j < v.size(); ++j) os << (j ? ";" : "") << v(j);
  return os.str();
}

}  // namespace

void validate(const DistributionSpec& spec) {
  std::visit(overloaded{
                 [](const GaussianIdentity& g) {
                   if (g.mean.size() < 1) throw std::invalid_argument("d must be >= 1");
                   if (!g.mean.allFinite()) throw std::invalid_argument("mean must be finite");
                 },
                 [](const BoundedCovariance& b) {
                   if (b.mean.size() < 1) throw std::invalid_argument("d must be >= 1");
                   if (!b.mean.allFinite()) throw std::invalid_argument("mean must be finite");
                   if (!(b.sigma > 0.0) || !std::isfinite(b.sigma))
                     throw std::invalid_argument("sigma must be positive");
                 },
                 [](const TwoPointMixture& t) {
                   check_prob(t.spike_prob);
                   if (!std::isfinite(t.base) || !std::isfinite(t.spike_location))
                     throw std::invalid_argument("locations must be finite");
                 },
                 [](const GaussianWithSpike& t) {
                   check_prob(t.spike_prob);
                   if (!std::isfinite(t.base) || !std::isfinite(t.spike_location))
                     throw std::invalid_argument("locations must be finite");
                 },
             },
             spec);
}

int dimension(const DistributionSpec& spec) {
  return std::visit(overloaded{
                        [](const GaussianIdentity& g) { return static_cast<int>(g.mean.size()); },
                        [](const BoundedCovariance& b) { return static_cast<int>(b.mean.size()); },
                        [](const auto&) { return 1; },
                    },
                    spec);
}

Eigen::VectorXd population_mean(const DistributionSpec& spec) {
  return std::visit(
      overloaded{
          [](const GaussianIdentity& g) -> Eigen::VectorXd { return g.mean; },
          [](const BoundedCovariance& b) -> Eigen::VectorXd { return b.mean; },
          [](const TwoPointMixture& t) -> Eigen::VectorXd {
            return Eigen::VectorXd::Constant(
                1, (1.0 - t.spike_prob) * t.base + t.spike_prob * t.spike_location);
          },
          [](const GaussianWithSpike& t) -> Eigen::VectorXd {
            return Eigen::VectorXd::Constant(
                1, (1.0 - t.spike_prob) * t.base + t.spike_prob * t.spike_location);
          },
      },
      spec);
}

Eigen::VectorXd draw(const DistributionSpec& spec, SplitMix64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::visit(
      overloaded{
          [&](const GaussianIdentity& g) -> Eigen::VectorXd {
            Eigen::VectorXd x(g.mean.size());
            for (int j = 0; j < x.size(); ++j) x(j) = g.mean(j) + normal(rng);
            return x;
          },
          [&](const BoundedCovariance& b) -> Eigen::VectorXd {
            const int d = static_cast<int>(b.mean.size());
            Eigen::VectorXd g(d);
            for (int j = 0; j < d; ++j) g(j) = normal(rng);
            if (b.shape == CovShape::GaussianScaled) return b.mean + b.sigma * g;
            // uniform on the ball of radius sigma*sqrt(d+2): covariance R^2/(d+2) I
            const double radius = b.sigma * std::sqrt(d + 2.0);
            const double u = rng.uniform();
            const double norm = g.norm();
            if (norm == 0.0) return b.mean;
            return b.mean + g * (radius * std::pow(u, 1.0 / d) / norm);
          },
          [&](const TwoPointMixture& t) -> Eigen::VectorXd {
            const bool spike = rng.uniform() < t.spike_prob;
            return Eigen::VectorXd::Constant(1, spike ? t.spike_location : t.base);
          },
          [&](const GaussianWithSpike& t) -> Eigen::VectorXd {
            const bool spike = rng.uniform() < t.spike_prob;
            const double g = normal(rng);
            return Eigen::VectorXd::Constant(1, spike ? t.spike_location : t.base + g);
          },
      },
      spec);
}

DistributionSpec parse_distribution(const std::string& text, int d) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    for (const auto& item : split(text.substr(colon + 1), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("expected key=value: " + item);
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto take = [&](const std::string& key, const std::string& def) {
    auto it = kv.find(key);
    std::string v = it == kv.end() ? def : it->second;
    if (it != kv.end()) kv.erase(it);
    return v;
  };

  DistributionSpec spec;
  if (name == "gaussian") {
    spec = GaussianIdentity{parse_vector(take("mean", "0"), d)};
  } else if (name == "boundedcov") {
    BoundedCovariance b;
    b.mean = parse_vector(take("mean", "0"), d);
    b.sigma = to_double(take("sigma", "1"));
    const std::string shape = take("shape", "gaussian");
    if (shape == "gaussian") {
      b.shape = CovShape::GaussianScaled;
    } else if (shape == "ball") {
      b.shape = CovShape::UniformBall;
    } else {
      throw std::invalid_argument("unknown shape: " + shape);
    }
    spec = b;
  } else if (name == "twopoint" || name == "gaussspike") {
    if (d != 1) throw std::invalid_argument(name + " is one-dimensional");
    const double base = to_double(take("base", "0"));
    const double spike = to_double(take("spike", "0"));
    const double prob = to_double(take("prob", "0"));
    if (name == "twopoint") {
      spec = TwoPointMixture{base, spike, prob};
    } else {
      spec = GaussianWithSpike{base, spike, prob};
    }
  } else {
    throw std::invalid_argument("unknown distribution: " + name);
  }
  if (!kv.empty()) throw std::invalid_argument("unknown key: " + kv.begin()->first);
  validate(spec);
  return spec;
}

std::string format_distribution(const DistributionSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const GaussianIdentity& g) { os << "gaussian:mean=" << format_vector(g.mean); },
                 [&](const BoundedCovariance& b) {
                   os << "boundedcov:sigma=" << b.sigma << ",shape="
                      << (b.shape == CovShape::GaussianScaled ? "gaussian" : "ball")
                      << ",mean=" << format_vector(b.mean);
                 },
                 [&](const TwoPointMixture& t) {
                   os << "twopoint:base=" << t.base << ",spike=" << t.spike_location
                      << ",prob=" << t.spike_prob;
                 },
                 [&](const GaussianWithSpike& t) {
                   os << "gaussspike:base=" << t.base << ",spike=" << t.spike_location
                      << ",prob=" << t.spike_prob;
                 },
             },
             spec);
  return os.str();
}

SampleSet sample(const DistributionSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  validate(spec);
  const int d = dimension(spec);
  SplitMix64 rng(seed);
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) data.row(i) = draw(spec, rng).transpose();
  return make_sample_set(std::move(data), population_mean(spec), seed, spec);
}

SampleSet make_sample_set(Eigen::MatrixXd data, Eigen::VectorXd true_mean, std::uint64_t seed,
                          std::optional<DistributionSpec> spec) {
  if (data.rows() < 1 || data.cols() < 1) throw std::invalid_argument("empty sample");
  SampleSet s;
  s.empirical_mean = data.colwise().mean().transpose();
  s.data = std::move(data);
  s.true_mean = std::move(true_mean);
  s.seed = seed;
  s.spec = std::move(spec);
  return s;
}

double covariance_opnorm(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw std::invalid_argument("need at least 2 rows");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

double empirical_covariance_opnorm(const SampleSet& s) { return covariance_opnorm(s.data); }

}  // namespace rme
