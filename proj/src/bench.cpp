#include "rme/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rme/adversary.hpp"
#include "rme/certify.hpp"
#include "rme/estimators.hpp"

namespace rme {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
const std::set<std::string> kEstimators = {"sos", "mean", "median", "geomedian", "gauss1d"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(x))
    throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw std::invalid_argument("config key '" + key + "': out of range: '" + v + "'");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: '" + v + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "ok";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::NotConverged:
      return "not_converged";
  }
  return "failed";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw std::invalid_argument("config key '" + key + "' given twice");
    if (key == "dist") {
      cfg.dist = value;
    } else if (key == "strategy") {
      cfg.strategy = value;
    } else if (key == "eps") {
      cfg.eps.clear();
      for (const auto& e : split_list(value)) cfg.eps.push_back(to_double(key, e));
    } else if (key == "n") {
      cfg.n = to_int(key, value);
    } else if (key == "d") {
      cfg.d = to_int(key, value);
    } else if (key == "k") {
      cfg.k = to_int(key, value);
    } else if (key == "r") {
      cfg.r = to_int(key, value);
    } else if (key == "basis") {
      cfg.basis = parse_basis_kind(value);
    } else if (key == "trials") {
      cfg.trials = to_int(key, value);
    } else if (key == "seed") {
      const long long s = to_integer(key, value);
      if (s < 0) throw std::invalid_argument("config key 'seed' must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "sigma") {
      cfg.sigma = to_double(key, value);
    } else if (key == "tol") {
      cfg.tol = to_double(key, value);
    } else if (key == "max_iter") {
      cfg.max_iter = to_int(key, value);
    } else if (key == "estimators") {
      cfg.estimators = split_list(value);
    } else if (key == "timing") {
      cfg.timing = to_bool(key, value);
    } else if (key == "gauss1d_halfwidth") {
      cfg.gauss1d_halfwidth = to_double(key, value);
    } else if (key == "gauss1d_step") {
      cfg.gauss1d_step = to_double(key, value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (cfg.eps.empty()) fail("eps grid is empty");
  for (double e : cfg.eps)
    if (!(e >= 0.0 && e < 0.5)) fail("eps " + fmt(e) + " outside [0, 1/2)");
  if (cfg.n < 2) fail("n must be at least 2");
  if (cfg.d < 1) fail("d must be at least 1");
  if (cfg.k != 2 && cfg.k != 4) fail("k must be 2 or 4");
  if (cfg.r < 1 || cfg.r > 3) fail("r must be 1, 2 or 3");
  if (cfg.trials < 1) fail("trials must be at least 1");
  if (!(cfg.sigma > 0.0)) fail("sigma must be positive");
  if (!(cfg.tol > 0.0)) fail("tol must be positive");
  if (cfg.max_iter < 1) fail("max_iter must be positive");
  if (!(cfg.gauss1d_halfwidth > 0.0) || !(cfg.gauss1d_step > 0.0))
    fail("gauss1d grid must be positive");
  if (cfg.estimators.empty()) fail("no estimators");
  std::set<std::string> names;
  for (const auto& e : cfg.estimators) {
    if (!kEstimators.count(e)) fail("unknown estimator '" + e + "'");
    if (!names.insert(e).second) fail("estimator '" + e + "' listed twice");
    if (e == "gauss1d" && cfg.d != 1) fail("gauss1d needs d = 1");
  }
  // surfaces malformed spec strings before any trial runs
  const auto spec = parse_distribution(cfg.dist, cfg.d);
  rme::validate(spec);
  if (dimension(spec) != cfg.d) fail("dist dimension does not match d");
  parse_strategy(cfg.strategy, cfg.d);
}

ExperimentReport run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentReport report;
  report.config = cfg;
  const auto spec = parse_distribution(cfg.dist, cfg.d);
  const auto strategy = parse_strategy(cfg.strategy, cfg.d);
  SosOptions sos;
  sos.basis = cfg.basis;
  sos.solver.tol = cfg.tol;
  sos.solver.max_iter = cfg.max_iter;
  const double s2 = cfg.sigma * cfg.sigma;

  for (double eps : cfg.eps) {
    const auto [opt, brk] = bounds::for_order(eps, cfg.k);
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(t);
      const SampleSet s = sample(spec, cfg.n, seed);
      const CorruptedSet z = corrupt(s, eps, strategy, derive_seed(seed, 1));
      for (const auto& name : cfg.estimators) {
        ExperimentRow row;
        row.eps = eps;
        row.trial = t;
        row.estimator = name;
        row.bound_optimal = opt * s2;
        row.bound_breakdown = brk * s2;
        row.residual_eq = kNan;
        row.residual_psd = kNan;
        row.status = "ok";
        EstimateReport est;
        try {
          if (name == "sos") {
            est = sos_mean(z, cfg.sigma, cfg.k, cfg.r, sos);
          } else if (name == "mean") {
            est = sample_mean(z);
          } else if (name == "median") {
            est = coordinate_median(z);
          } else if (name == "geomedian") {
            est = geometric_median(z);
          } else {
            est = gaussian_projection_1d(z.z.col(0), cfg.gauss1d_halfwidth, cfg.gauss1d_step,
                                         z.mu_star[0]);
          }
        } catch (const EstimationError& e) {
          est = e.report();
          row.status = est.status ? status_name(*est.status) : "failed";
        } catch (const std::exception&) {
          est = EstimateReport{};
          row.status = "failed";
        }
        row.error = est.error;
        if (est.residuals) {
          row.residual_eq = est.residuals->equality;
          row.residual_psd = est.residuals->psd_slack;
        }
        row.seconds = cfg.timing ? est.seconds : 0.0;
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<GroupSummary> ExperimentReport::summarize() const {
  // keyed by (eps, estimator) so the result does not depend on row order
  std::map<std::pair<double, std::string>, std::pair<std::vector<double>, GroupSummary>> groups;
  for (const auto& row : rows) {
    auto& [errors, g] = groups[{row.eps, row.estimator}];
    g.eps = row.eps;
    g.estimator = row.estimator;
    ++g.rows;
    if (row.status != "ok") ++g.failures;
    if (std::isfinite(row.error)) errors.push_back(row.error);
  }
  std::vector<GroupSummary> out;
  for (auto& [key, entry] : groups) {
    auto& [errors, g] = entry;
    if (errors.empty()) {
      g.median = g.q1 = g.q3 = kNan;
    } else {
      g.median = quantile(errors, 0.5);
      g.q1 = quantile(errors, 0.25);
      g.q3 = quantile(errors, 0.75);
    }
    out.push_back(g);
  }
  return out;
}

double theory_rate(double eps, int k) {
  const double delta = 1.0 - 2.0 * eps;
  if (k == 2) return std::sqrt(eps / delta);
  return std::sqrt(static_cast<double>(k)) / std::pow(delta, 1.0 / k);
}

bool RateFit::pass() const {
  return !pairs.empty() &&
         std::all_of(pairs.begin(), pairs.end(), [](const RatePair& p) { return p.within(); });
}

RateFit fit_rate(const ExperimentReport& report, const std::string& estimator,
                 std::optional<double> anchor) {
  std::map<double, std::vector<double>> errors;
  for (const auto& row : report.rows)
    if (row.estimator == estimator) {
      auto& v = errors[row.eps];
      if (std::isfinite(row.error)) v.push_back(row.error);
    }
  if (errors.size() < 2) throw std::invalid_argument("fit_rate needs at least 2 grid points");
  std::map<double, double> med;
  for (const auto& [eps, v] : errors) {
    if (eps <= 0.0) throw std::invalid_argument("fit_rate: theory rate is zero at eps = 0");
    if (v.size() < 10)
      throw std::invalid_argument("fit_rate needs at least 10 trials at eps = " + fmt(eps));
    med[eps] = quantile(v, 0.5);
  }
  const int k = report.config.k;
  auto pair = [&](double a, double b) {
    RatePair p;
    p.eps_a = a;
    p.eps_b = b;
    p.empirical = med.at(b) / med.at(a);
    p.theory = theory_rate(b, k) / theory_rate(a, k);
    return p;
  };
  RateFit fit;
  if (anchor) {
    if (!med.count(*anchor)) throw std::invalid_argument("fit_rate: anchor not in the grid");
    for (const auto& [eps, m] : med)
      if (eps != *anchor) fit.pairs.push_back(pair(*anchor, eps));
  } else {
    for (auto a = med.begin(); a != med.end(); ++a)
      for (auto b = std::next(a); b != med.end(); ++b) fit.pairs.push_back(pair(a->first, b->first));
  }
  return fit;
}

void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "eps,trial,estimator,error,bound_optimal,bound_breakdown,residual_eq,residual_psd,seconds,"
         "status\n";
  for (const auto& r : report.rows)
    out << fmt(r.eps) << ',' << r.trial << ',' << r.estimator << ',' << fmt(r.error) << ','
        << fmt(r.bound_optimal) << ',' << fmt(r.bound_breakdown) << ',' << fmt(r.residual_eq) << ','
        << fmt(r.residual_psd) << ',' << fmt(r.seconds) << ',' << r.status << '\n';
}

std::string summary_json(const ExperimentReport& report) {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  const auto& c = report.config;
  ordered_json j;
  ordered_json eps = ordered_json::array();
  for (double e : c.eps) eps.push_back(e);
  j["config"] = {{"dist", c.dist},       {"strategy", c.strategy},
                 {"eps", eps},           {"n", c.n},
                 {"d", c.d},             {"k", c.k},
                 {"r", c.r},             {"basis", to_string(c.basis)},
                 {"trials", c.trials},   {"seed", c.seed},
                 {"sigma", c.sigma},     {"tol", c.tol},
                 {"max_iter", c.max_iter}, {"estimators", c.estimators}};
  ordered_json groups = ordered_json::array();
  for (const auto& g : report.summarize())
    groups.push_back({{"eps", g.eps},
                      {"estimator", g.estimator},
                      {"rows", g.rows},
                      {"failures", g.failures},
                      {"median", num(g.median)},
                      {"q1", num(g.q1)},
                      {"q3", num(g.q3)},
                      {"iqr", num(g.iqr())}});
  j["groups"] = groups;
  ordered_json fits = ordered_json::object();
  for (const auto& name : c.estimators) {
    try {
      const RateFit fit = fit_rate(report, name);
      ordered_json pairs = ordered_json::array();
      for (const auto& p : fit.pairs)
        pairs.push_back({{"eps_a", p.eps_a},
                         {"eps_b", p.eps_b},
                         {"empirical", num(p.empirical)},
                         {"theory", p.theory},
                         {"ratio", num(p.ratio())}});
      fits[name] = {{"verdict", fit.pass() ? "PASS" : "FAIL"}, {"pairs", pairs}};
    } catch (const std::invalid_argument&) {
      // not enough data for a fit
    }
  }
  j["rate_fit"] = fits;
  return j.dump(2);
}

}  // namespace rme
