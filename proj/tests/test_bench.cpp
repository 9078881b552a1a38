#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "rme/bench.hpp"
#include "rme/certify.hpp"
#include "rme/estimators.hpp"

using namespace rme;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentReport synthetic(const std::vector<double>& eps, int trials, double (*err)(double, int)) {
  ExperimentReport r;
  r.config.eps = eps;
  r.config.trials = trials;
  for (double e : eps)
    for (int t = 0; t < trials; ++t) {
      ExperimentRow row;
      row.eps = e;
      row.trial = t;
      row.estimator = "sos";
      row.error = err(e, t);
      row.status = "ok";
      r.rows.push_back(row);
    }
  return r;
}

}  // namespace

TEST(Bench, ParseConfig) {
  const auto cfg = parse_config(
      "# sweep\n"
      "dist = gaussian\n"
      "strategy = point:5   # far cluster\n"
      "eps = 0.1, 0.2\n"
      "n = 12\nd = 1\ntrials = 3\nseed = 7\n"
      "estimators = mean,median\n"
      "basis = full\n");
  EXPECT_EQ(cfg.eps, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(cfg.strategy, "point:5");
  EXPECT_EQ(cfg.n, 12);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.basis, BasisKind::Full);
  EXPECT_EQ(cfg.estimators, (std::vector<std::string>{"mean", "median"}));
}

TEST(Bench, ConfigErrors) {
  EXPECT_THROW(parse_config("eps = 0.5\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("n = 10\n"), std::invalid_argument);  // no grid
  EXPECT_THROW(parse_config("eps = 0.1\nfoo = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\nn = ten\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\ntrials = 0\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\nk = 3\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\nestimators = sos, magic\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\nestimators = gauss1d\n"), std::invalid_argument);  // d = 2
  EXPECT_THROW(parse_config("eps = 0.1\neps = 0.2\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("eps = 0.1\njunk line\n"), std::invalid_argument);
}

TEST(Bench, CleanMeanRow) {
  auto cfg = parse_config("eps = 0\ntrials = 1\nestimators = mean\nn = 30\nd = 2\nseed = 4\n");
  const auto rep = run_sweep(cfg);
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto s = sample(parse_distribution("gaussian", 2), 30, 4);
  EXPECT_DOUBLE_EQ(rep.rows[0].error, 0.0);  // error is against the empirical mean
  EXPECT_EQ(rep.rows[0].status, "ok");
  (void)s;
}

TEST(Bench, RowCountAndBounds) {
  auto cfg = parse_config("eps = 0, 0.2, 0.4\ntrials = 4\nestimators = mean, median, geomedian\nn = 20\n");
  const auto rep = run_sweep(cfg);
  EXPECT_EQ(rep.rows.size(), 3u * 4u * 3u);
  for (const auto& r : rep.rows) {
    EXPECT_GE(r.error, 0.0);
    const auto [o, b] = bounds::for_order(r.eps, 2);
    EXPECT_EQ(r.bound_optimal, o);
    EXPECT_EQ(r.bound_breakdown, b);
  }
}

TEST(Bench, ByteIdenticalCsv) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "rme_bench_a.csv", b = dir / "rme_bench_b.csv";
  const auto cfg = parse_config("eps = 0.1, 0.3\ntrials = 3\nn = 10\nd = 1\nestimators = sos, mean\n");
  write_report_csv(a, run_sweep(cfg));
  write_report_csv(b, run_sweep(cfg));
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(a).substr(0, slurp(a).find('\n')),
            "eps,trial,estimator,error,bound_optimal,bound_breakdown,residual_eq,residual_psd,seconds,status");
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Bench, FailuresAreRecorded) {
  // an iteration cap far below what the solver needs
  auto cfg = parse_config("eps = 0.2\ntrials = 2\nn = 10\nd = 1\nmax_iter = 2\nestimators = sos, mean\n");
  const auto rep = run_sweep(cfg);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].status, "not_converged");
  EXPECT_EQ(rep.rows[1].status, "ok");
  const auto groups = rep.summarize();
  EXPECT_EQ(groups.size(), 2u);
}

TEST(Bench, SosMonotone) {
  const auto cfg = parse_config(
      "dist = gaussian\nstrategy = point:3.6;0\neps = 0.1, 0.45\nn = 40\nd = 2\nsigma = 1.2\n"
      "trials = 20\nseed = 1000\nestimators = sos\n");
  const auto groups = run_sweep(cfg).summarize();
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_GT(groups[1].median, groups[0].median);
}

TEST(Bench, AggregationOrderInvariant) {
  auto rep = synthetic({0.1, 0.2}, 11, [](double e, int t) { return e * (1 + t); });
  const auto before = rep.summarize();
  std::mt19937 g(3);
  std::shuffle(rep.rows.begin(), rep.rows.end(), g);
  const auto after = rep.summarize();
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].median, after[i].median);
    EXPECT_EQ(before[i].q1, after[i].q1);
    EXPECT_EQ(before[i].q3, after[i].q3);
  }
  EXPECT_DOUBLE_EQ(before[0].median, 0.1 * 6);
}

TEST(Bench, Quantile) {
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.75), 5.0);
}

TEST(Bench, TheoryRatio) {
  EXPECT_NEAR(theory_rate(0.45, 2) / theory_rate(0.2, 2), 3.674, 1e-3);
  EXPECT_NEAR(std::sqrt(0.45 / 0.1), 2.1213, 1e-4);
  EXPECT_NEAR(theory_rate(0.3, 4), 2.0 / std::pow(0.4, 0.25), 1e-12);
}

TEST(Bench, FitRate) {
  const auto good = synthetic({0.1, 0.2, 0.45}, 10, [](double e, int t) { return theory_rate(e, 2) * (1 + 0.01 * t); });
  const auto fit = fit_rate(good, "sos", 0.2);
  EXPECT_TRUE(fit.pass());
  EXPECT_EQ(fit.pairs.size(), 2u);
  const auto constant = synthetic({0.2, 0.45}, 10, [](double, int) { return 1.0; });
  const auto bad = fit_rate(constant, "sos");
  ASSERT_EQ(bad.pairs.size(), 1u);
  EXPECT_DOUBLE_EQ(bad.pairs[0].empirical, 1.0);
  EXPECT_NEAR(bad.pairs[0].theory, 3.674, 1e-3);
  EXPECT_FALSE(bad.pass());
}

TEST(Bench, FitRateInsufficient) {
  const auto one = synthetic({0.2}, 10, [](double, int) { return 1.0; });
  EXPECT_THROW(fit_rate(one, "sos"), std::invalid_argument);
  const auto few = synthetic({0.1, 0.2}, 9, [](double, int) { return 1.0; });
  EXPECT_THROW(fit_rate(few, "sos"), std::invalid_argument);
  const auto zero = synthetic({0.0, 0.2}, 10, [](double, int) { return 1.0; });
  EXPECT_THROW(fit_rate(zero, "sos"), std::invalid_argument);
}

TEST(Bench, SummaryJson) {
  const auto rep = synthetic({0.1, 0.2}, 10, [](double e, int t) { return e + t; });
  const auto j = nlohmann::json::parse(summary_json(rep));
  EXPECT_EQ(j["groups"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["groups"][0]["median"].get<double>(), 0.1 + 4.5);
  EXPECT_TRUE(j["rate_fit"].contains("sos") || j["rate_fit"].empty());
}
