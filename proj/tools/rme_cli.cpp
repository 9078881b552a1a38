#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rme/adversary.hpp"
#include "rme/bench.hpp"
#include "rme/certify.hpp"
#include "rme/estimators.hpp"
#include "rme/io.hpp"
#include "rme/synth.hpp"
#include "rme/toolkit.hpp"

using namespace rme;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json vec(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

ordered_json checks_json(const std::vector<Check>& checks) {
  ordered_json a = ordered_json::array();
  for (const auto& c : checks)
    a.push_back({{"name", c.name},
                 {"value", num(c.value)},
                 {"relation", c.relation},
                 {"reference", num(c.reference)},
                 {"tol", c.tol},
                 {"pass", c.pass}});
  return a;
}

ordered_json report_json(const EstimateReport& r) {
  ordered_json j;
  j["estimator"] = r.estimator;
  j["mu_hat"] = vec(r.mu_hat);
  j["error"] = num(r.error);
  j["seconds"] = r.seconds;
  if (r.status) j["status"] = to_string(*r.status);
  if (r.residuals) {
    const auto& res = *r.residuals;
    j["residuals"] = {{"equality", res.equality},
                      {"normalization", res.normalization},
                      {"psd_slack", res.psd_slack},
                      {"displacement", res.displacement},
                      {"iterations", res.iterations}};
    j["sigma_used"] = r.sigma_used;
    j["witness_feasible"] = r.witness_feasible;
  }
  if (r.estimator == "geomedian") j["iterations"] = r.iterations;
  return j;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust mean estimation with sum-of-squares relaxations"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Draw a clean sample");
  std::string dist;
  int n = 0, d = 1;
  std::uint64_t seed = 0;
  std::string out;
  gen->add_option("--dist", dist, "gaussian[:mean=M] | boundedcov:sigma=S[,shape=gaussian|ball][,mean=M] | "
                                  "twopoint:spike=S,prob=P[,base=B] | gaussspike:spike=S,prob=P[,base=B]")
      ->required();
  gen->add_option("--n", n)->required()->check(CLI::PositiveNumber);
  gen->add_option("--d", d)->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed)->required();
  gen->add_option("--out", out)->required();

  // corrupt
  auto* cor = app.add_subcommand("corrupt", "Apply an eps-corruption to a sample");
  std::string in, strategy;
  double eps = 0.0;
  cor->add_option("--in", in)->required()->check(CLI::ExistingFile);
  cor->add_option("--eps", eps)->required();
  cor->add_option("--strategy", strategy, "identity | point:R[;R2..] | spike:K[:coord] | mixture:<dist>")
      ->required();
  cor->add_option("--seed", seed)->required();
  cor->add_option("--out", out)->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate the mean of a corrupted sample");
  std::string estimator, basis = "full", trace;
  double sigma = 1.0, tol = 1e-6, halfwidth = 10.0, step = 0.01;
  int k = 2, r = 2, max_iter = 50000;
  std::optional<double> est_eps;
  est->add_option("--in", in)->required()->check(CLI::ExistingFile);
  est->add_option("--estimator", estimator)
      ->required()
      ->check(CLI::IsMember({"sos", "mean", "median", "geomedian", "gauss1d"}));
  est->add_option("--eps", est_eps, "corruption fraction (default: the sidecar's)");
  est->add_option("--sigma", sigma)->check(CLI::PositiveNumber);
  est->add_option("--k", k)->check(CLI::IsMember({2, 4}));
  est->add_option("--r", r)->check(CLI::Range(1, 3));
  est->add_option("--basis", basis)->check(CLI::IsMember({"full", "wlinear"}));
  est->add_option("--tol", tol)->check(CLI::PositiveNumber);
  est->add_option("--max-iter", max_iter)->check(CLI::PositiveNumber);
  est->add_option("--trace", trace, "solver trace CSV");
  est->add_option("--halfwidth", halfwidth, "gauss1d grid half-width")->check(CLI::PositiveNumber);
  est->add_option("--step", step, "gauss1d grid step")->check(CLI::PositiveNumber);
  est->add_option("--out", out)->required();

  // verify-lb
  auto* vlb = app.add_subcommand("verify-lb", "Check a lower-bound construction");
  std::string family, regime = "large";
  vlb->add_option("--family", family)->required()->check(CLI::IsMember({"moment", "gaussian", "gauss-vs-cov"}));
  vlb->add_option("--eps", eps)->required();
  vlb->add_option("--k", k)->check(CLI::IsMember({2, 4}));
  vlb->add_option("--regime", regime)->check(CLI::IsMember({"large", "small"}));

  // verify-toolkit
  auto* vtk = app.add_subcommand("verify-toolkit", "Randomized checks of the SoS toolkit inequalities");
  long trials = 10000;
  vtk->add_option("--trials", trials)->check(CLI::PositiveNumber);
  vtk->add_option("--seed", seed);

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run an eps sweep from a config file");
  std::string config;
  swp->add_option("--config", config)->required()->check(CLI::ExistingFile);
  swp->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const SampleSet s = sample(parse_distribution(dist, d), n, seed);
      save_sample(out, s);
      return 0;
    }
    if (*cor) {
      const SampleSet s = load_sample(in);
      const CorruptedSet z = corrupt(s, eps, parse_strategy(strategy, s.d()), seed);
      save_corrupted(out, z, strategy, seed, fs::absolute(in));
      return 0;
    }
    if (*est) {
      CorruptedSet z = load_corrupted(in);
      if (est_eps) z.epsilon = *est_eps;
      if (!(z.epsilon >= 0.0 && z.epsilon < 0.5))
        throw std::invalid_argument("eps must lie in [0, 1/2)");
      EstimateReport rep;
      int code = 0;
      try {
        if (estimator == "sos") {
          SosOptions o;
          o.basis = parse_basis_kind(basis);
          o.solver.tol = tol;
          o.solver.max_iter = max_iter;
          o.solver.trace_path = trace;
          rep = sos_mean(z, sigma, k, r, o);
        } else if (estimator == "mean") {
          rep = sample_mean(z);
        } else if (estimator == "median") {
          rep = coordinate_median(z);
        } else if (estimator == "geomedian") {
          rep = geometric_median(z);
        } else {
          if (z.d() != 1) throw std::invalid_argument("gauss1d needs one-dimensional data");
          std::optional<double> mu;
          if (z.mu_star.size() == 1) mu = z.mu_star[0];
          rep = gaussian_projection_1d(z.z.col(0), halfwidth, step, mu);
        }
      } catch (const EstimationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        rep = e.report();
        code = 2;
      }
      write_text(out, report_json(rep).dump(2));
      return code;
    }
    if (*vlb) {
      LowerBoundPair p;
      if (family == "moment")
        p = lb_bounded_moment_pair(eps, k);
      else if (family == "gaussian")
        p = lb_gaussian_pair(eps);
      else
        p = lb_gauss_vs_bounded_cov(eps, parse_regime(regime));
      ordered_json j;
      j["family"] = p.family;
      j["eps"] = p.eps;
      if (p.k) j["k"] = p.k;
      j["d1"] = format_distribution(p.d1);
      j["d2"] = format_distribution(p.d2);
      j["tv"] = p.tv;
      j["mean_gap"] = p.mean_gap;
      j["kth_central_moment_d2"] = num(p.kth_central_moment_d2);
      j["variance_d2"] = num(p.variance_d2);
      j["checks"] = checks_json(p.checks);
      j["pass"] = p.pass();
      std::cout << j.dump(2) << '\n';
      return p.pass() ? 0 : 1;
    }
    if (*vtk) {
      const ToolkitReport rep = toolkit_suite(trials, seed);
      ordered_json a = ordered_json::array();
      for (const auto& e : rep.entries)
        a.push_back({{"name", e.name}, {"trials", e.trials}, {"violations", e.violations}, {"worst", e.worst}});
      ordered_json j;
      j["slack"] = kToolkitSlack;
      j["entries"] = a;
      j["pass"] = rep.pass();
      std::cout << j.dump(2) << '\n';
      return rep.pass() ? 0 : 1;
    }
    if (*swp) {
      const ExperimentConfig cfg = load_config(config);
      const ExperimentReport rep = run_sweep(cfg);
      fs::create_directories(out);
      write_report_csv(fs::path(out) / "report.csv", rep);
      write_text(fs::path(out) / "summary.json", summary_json(rep));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
