#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cdi/errors.hpp"
#include "cdi/simulation.hpp"
#include "cdi/tail_analysis.hpp"

using namespace cdi;

namespace {

constexpr double kTau2 = 0.916813956124162836;    // beta = 2, x = 2
constexpr double kTau12 = 0.433713997606950144;   // beta = 2, x = 1.2

SimConfig config(std::uint64_t seed, std::int64_t reps, double trunc_tol = 1e-2) {
  SimConfig c;
  c.seed = seed;
  c.replicates = reps;
  c.trunc_tol = trunc_tol;
  return c;
}

double fourth_central(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += std::pow(x - mean, 4);
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("replicate streams are reproducible and distinct") {
  Rng a = replicate_stream(7, 0);
  Rng b = replicate_stream(7, 0);
  Rng c = replicate_stream(7, 1);
  Rng d = replicate_stream(8, 0);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform_open0(a);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("truncation level") {
  const RateModel k = RateModel::kingman();
  const Truncation tr = make_truncation(k, 100, config(1, 1));
  CHECK(tr.K > 100);
  CHECK(tail_moments(k, tr.K).B <= 1e-2 * tail_moments(k, 100).B);
  CHECK(tail_moments(k, tr.K - 1).B > 1e-2 * tail_moments(k, 100).B);
  CHECK(tr.residual_mean == 2.0 / static_cast<double>(tr.K));
  CHECK(tr.g.size() == static_cast<std::size_t>(tr.K - 100));
  CHECK(tr.g.front() == k.inverse_rate(101));
  SimConfig tight = config(1, 1, 1e-9);
  tight.max_index = 5000;
  CHECK_THROWS_AS(make_truncation(k, 100, tight), TruncationError);
  CHECK_THROWS_AS(make_truncation(k, 100, config(1, 0)), DomainError);
}

TEST_CASE("hitting time moments match tail sums within 4 standard errors") {
  const RateModel k = RateModel::kingman();
  for (std::int64_t n : {2, 4, 10, 50}) {
    const SimConfig cfg = config(2024 + static_cast<std::uint64_t>(n), 100'000);
    const std::vector<double> t = sample_hitting_times(k, n, cfg);
    const TailStats s = tail_moments(k, n, 1e-12);
    const EstimateCI m = summarize(t, cfg.seed);
    const double var = sample_variance(t);
    const double var_se = std::sqrt((fourth_central(t, m.point) - var * var) / static_cast<double>(t.size()));
    INFO("n=" << n);
    CHECK(std::fabs(m.point - s.A) <= 4.0 * s.B / std::sqrt(1e5));
    CHECK(std::fabs(var - s.B * s.B) <= 4.0 * var_se);
    if (n == 4) CHECK(var == doctest::Approx(2.0585e-2).epsilon(0.02));
  }
  const RateModel geo = preset("geometric");
  const std::vector<double> t = sample_hitting_times(geo, 10, config(3, 100'000));
  CHECK(std::fabs(summarize(t, 3).point - std::exp(-10.0)) <= 4.0 * tail_moments(geo, 10).B / std::sqrt(1e5));
}

TEST_CASE("results do not depend on the thread count") {
  const RateModel k = RateModel::kingman();
  SimConfig one = config(99, 2000);
  SimConfig many = one;
  many.threads = 3;
  CHECK(sample_hitting_times(k, 30, one) == sample_hitting_times(k, 30, many));
  CHECK(sample_Z_many(k, 0.02, one) == sample_Z_many(k, 0.02, many));
  const TiltedEstimate a = tilted_estimate(k, 30, 1.5, 100.0, one);
  const TiltedEstimate b = tilted_estimate(k, 30, 1.5, 100.0, many);
  CHECK(a.estimate.point == b.estimate.point);
  CHECK(a.estimate.std_error == b.estimate.std_error);
}

TEST_CASE("path sample and duality") {
  const RateModel k = RateModel::kingman();
  const SimConfig cfg = config(5, 1);
  const double t = 2.0 / 60.0;
  int z_above = 0, t_above = 0;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    Rng rng = replicate_stream(cfg.seed, r);
    const PathSample p = sample_path(k, 20, 400, cfg, rng);
    REQUIRE(p.trunc_level >= 400);
    for (std::int64_t m = 21; m <= 400; ++m) REQUIRE(p.T(m) < p.T(m - 1));
    if (p.Z(t) > 60) ++z_above;
    if (p.T(60) > t) ++t_above;
  }
  CHECK(z_above == t_above);
  CHECK(z_above > 500);
  CHECK(z_above < 1500);
}

TEST_CASE("Z(t) walks down to an absorbing state") {
  const RateModel k = RateModel::kingman();
  const SimConfig cfg = config(11, 200);
  const auto z = sample_Z_many(k, 40.0, cfg);
  for (auto v : z) CHECK(v >= 1);
  int ones = 0;
  for (auto v : z) ones += v == 1;
  CHECK(ones > 150);  // P(T_1 <= 40) is close to one
  const auto z100 = sample_Z_many(k, 0.02, config(12, 2000));
  double mean = 0.0;
  for (auto v : z100) mean += static_cast<double>(v) / 100.0;
  mean /= 2000.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("moment generating function") {
  const RateModel k = RateModel::kingman();
  CHECK(mgf(k, 5, 0.0) == 1.0);
  SUBCASE("geometric at u = -1/A_n is the F_alpha Laplace transform at 1") {
    const RateModel geo = preset("geometric");
    for (int n : {3, 10, 30}) {
      CHECK(mgf(geo, n, -std::exp(double(n))) == doctest::Approx(0.435931251208209880).epsilon(1e-12));
    }
  }
  SUBCASE("kingman against Monte Carlo") {
    const std::int64_t n = 10;
    const double u = -20.0;
    const SimConfig cfg = config(17, 100'000);
    std::vector<double> e;
    for (double t : sample_hitting_times(k, n, cfg)) e.push_back(std::exp(u * t));
    const EstimateCI m = summarize(e, cfg.seed);
    CHECK(std::fabs(m.point - mgf(k, n, u)) <= 3.0 * m.std_error);
  }
  SUBCASE("closed form for kingman n = 1, u = -2: product of i(i-1)/(i(i-1)+4)") {
    double log_prod = 0.0;
    for (double i = 2; i < 2e7; ++i) log_prod += std::log1p(-4.0 / (i * (i - 1.0) + 4.0));
    CHECK(log_mgf(k, 1, -2.0) == doctest::Approx(log_prod).epsilon(1e-7));
  }
  CHECK_THROWS_AS(mgf(k, 5, 15.0), TiltDomainError);
  CHECK_NOTHROW(mgf(k, 5, 14.9));
}

TEST_CASE("tilted estimator") {
  const RateModel k = RateModel::kingman();
  SUBCASE("zero tilt is plain Monte Carlo") {
    const SimConfig cfg = config(21, 20'000);
    const TiltedEstimate z = tilted_estimate(k, 20, 1.2, 0.0, cfg);
    const std::vector<double> t = sample_hitting_times(k, 20, cfg);
    std::int64_t hits = 0;
    for (double v : t) hits += v > 1.2 * 0.1;
    CHECK(z.hits == hits);
    CHECK(z.estimate.point == doctest::Approx(double(hits) / 20'000.0).epsilon(1e-14));
    CHECK(z.upper);
    CHECK_FALSE(z.degenerate);
  }
  SUBCASE("tilted and naive intervals overlap at x = 1.2") {
    const std::int64_t n = 20;
    const double theta = kTau12 * n / tail_mean(k, n);
    const TiltedEstimate naive = tilted_estimate(k, n, 1.2, 0.0, config(31, 100'000));
    const TiltedEstimate tilt = tilted_estimate(k, n, 1.2, theta, config(32, 100'000));
    const double lo = std::max(naive.estimate.point - 1.96 * naive.estimate.std_error,
                               tilt.estimate.point - 1.96 * tilt.estimate.std_error);
    const double hi = std::min(naive.estimate.point + 1.96 * naive.estimate.std_error,
                               tilt.estimate.point + 1.96 * tilt.estimate.std_error);
    CHECK(lo <= hi);
  }
  SUBCASE("rare upper tail at x = 2") {
    const std::int64_t n = 50;
    const double theta = kTau2 * n / tail_mean(k, n);
    const TiltedEstimate t = tilted_estimate(k, n, 2.0, theta, config(41, 20'000));
    CHECK(t.hits > 5000);
    CHECK(t.relative_se < 0.05);
    CHECK(-t.log_point / n == doctest::Approx(0.653).epsilon(0.25));
    CHECK(t.ess > 100);
  }
  SUBCASE("lower tail") {
    constexpr double kTau05 = -5.43413150584655655;  // beta = 2, x = 0.5
    const TiltedEstimate t = tilted_estimate(k, 20, 0.5, kTau05 * 20 / 0.1, config(43, 5000));
    CHECK_FALSE(t.upper);
    CHECK(t.estimate.point > 0.0);
    CHECK(t.estimate.point < 1e-3);
    CHECK(t.hits > 1000);
  }
  SUBCASE("degenerate indicators are flagged") {
    const TiltedEstimate t = tilted_estimate(k, 20, 50.0, 0.0, config(44, 100));
    CHECK(t.degenerate);
    CHECK(t.hits == 0);
    CHECK(t.estimate.point == 0.0);
  }
  CHECK_THROWS_AS(tilted_estimate(k, 20, 2.0, 300.0, config(1, 10)), TiltDomainError);
  CHECK_THROWS_AS(tilted_estimate(k, 20, -1.0, 0.0, config(1, 10)), DomainError);
}
