#include "rme/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rme {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Eigen::VectorXd vector_from(const ordered_json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<long>(i)] = a[i].get<double>();
  return v;
}

ordered_json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return ordered_json::parse(in);
}

void write_json(const std::filesystem::path& p, const ordered_json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (long j = 0; j < m.cols(); ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const long d = 1 + std::count(line.begin(), line.end(), ',');
  std::vector<double> vals;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    long cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ": bad value '" + cell + "'");
      }
      vals.push_back(v);
      ++cols;
    }
    if (cols != d)
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                               std::to_string(cols) + " columns, expected " + std::to_string(d));
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
  Eigen::MatrixXd m(rows, d);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < d; ++j) m(i, j) = vals[static_cast<std::size_t>(i * d + j)];
  return m;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".json");
}

void save_sample(const std::filesystem::path& csv, const SampleSet& s) {
  write_matrix_csv(csv, s.data);
  ordered_json j;
  j["kind"] = "sample";
  if (s.spec) j["spec"] = format_distribution(*s.spec);
  j["seed"] = s.seed;
  j["true_mean"] = to_json(s.true_mean);
  j["empirical_mean"] = to_json(s.empirical_mean);
  write_json(sidecar_path(csv), j);
}

SampleSet load_sample(const std::filesystem::path& csv) {
  Eigen::MatrixXd data = read_matrix_csv(csv);
  const auto side = sidecar_path(csv);
  if (!std::filesystem::exists(side)) {
    Eigen::VectorXd mean = data.colwise().mean().transpose();
    return make_sample_set(std::move(data), mean, 0);
  }
  const ordered_json j = read_json(side);
  std::optional<DistributionSpec> spec;
  if (j.contains("spec")) spec = parse_distribution(j["spec"].get<std::string>(), data.cols());
  Eigen::VectorXd mu = vector_from(j.at("true_mean"));
  if (mu.size() != data.cols()) throw std::runtime_error(side.string() + ": true_mean has wrong length");
  return make_sample_set(std::move(data), mu, j.value("seed", std::uint64_t{0}), spec);
}

void save_corrupted(const std::filesystem::path& csv, const CorruptedSet& z,
                    const std::string& strategy, std::uint64_t seed,
                    const std::filesystem::path& origin) {
  write_matrix_csv(csv, z.z);
  ordered_json j;
  j["kind"] = "corrupted";
  j["epsilon"] = z.epsilon;
  j["mask_wstar"] = z.mask_wstar;
  if (z.mu_star.size() > 0) j["mu_star"] = to_json(z.mu_star);
  j["strategy"] = strategy;
  j["seed"] = seed;
  j["origin"] = origin.string();
  write_json(sidecar_path(csv), j);
}

CorruptedSet load_corrupted(const std::filesystem::path& csv) {
  CorruptedSet out;
  out.z = read_matrix_csv(csv);
  const auto side = sidecar_path(csv);
  if (!std::filesystem::exists(side)) {
    out.mask_wstar.assign(static_cast<std::size_t>(out.n()), 1);
    return out;
  }
  const ordered_json j = read_json(side);
  if (j.value("kind", "") == "sample") {
    // a clean sample used directly as input
    out.mask_wstar.assign(static_cast<std::size_t>(out.n()), 1);
    out.mu_star = out.z.colwise().mean().transpose();
    return out;
  }
  out.epsilon = j.at("epsilon").get<double>();
  out.mask_wstar = j.at("mask_wstar").get<std::vector<std::uint8_t>>();
  if (static_cast<int>(out.mask_wstar.size()) != out.n())
    throw std::runtime_error(side.string() + ": mask_wstar length does not match the data");
  if (j.contains("mu_star")) {
    out.mu_star = vector_from(j["mu_star"]);
    if (out.mu_star.size() != out.d()) throw std::runtime_error(side.string() + ": mu_star has wrong length");
  }
  return out;
}

}  // namespace rme
