#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "cdi/errors.hpp"
#include "cdi/large_deviations.hpp"
#include "cdi/tail_analysis.hpp"

using namespace cdi;

namespace {

// mpmath at 40 digits, with the tail beyond y = 1000 summed as a series.
struct TauOracle {
  double beta, x, tau, I;
};
constexpr TauOracle kTauOracle[] = {
    {1.3, 0.5, -90.0518223769225208439, 10.1750137606989915204},
    {1.3, 2.0, 3.30139718830107955565, 2.66715132886808693087},
    {3.0, 0.5, -1.87093768542995594066, 0.314504980110206348923},
    {3.0, 2.0, 0.43484240553473216672, 0.298429610584044956918},
};

// beta = 2 closed forms: Lambda'(u) = artanh(sqrt u)/sqrt u for u in (0,1), arctan(sqrt -u)/sqrt -u for u < 0.
double lambda1_beta2(double u) {
  // atanh(r) = log(1 + r) - log(1 - u)/2 with r = sqrt u keeps 1 - u exact near u = 1.
  if (u > 0) return (std::log1p(std::sqrt(u)) - 0.5 * std::log1p(-u)) / std::sqrt(u);
  if (u < 0) return std::atan(std::sqrt(-u)) / std::sqrt(-u);
  return 1.0;
}

double tau_beta2_oracle(double x) {
  if (x == 1.0) return 0.0;
  double lo = x > 1.0 ? 0.0 : -1.0;
  double hi = x > 1.0 ? 1.0 : 0.0;
  if (x < 1.0) {
    while (lambda1_beta2(lo) > x) lo *= 2.0;
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (lambda1_beta2(mid) < x ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> log_grid(double a, double b, int points) {
  std::vector<double> g;
  for (int k = 0; k < points; ++k) g.push_back(a * std::pow(b / a, double(k) / (points - 1)));
  return g;
}

}  // namespace

TEST_CASE("Lambda and its derivatives") {
  const LdContext two(2.0);
  CHECK(lambda_fn(two, 0.0) == 0.0);
  CHECK(lambda_deriv(two, 0.0, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(lambda_deriv(two, -1.0, 1) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
  CHECK(lambda_fn(two, -1.0) == doctest::Approx(-0.87764914623495130981).epsilon(1e-12));
  CHECK(lambda_fn(LdContext(1.3), -1.0) == doctest::Approx(-0.974569950951293301073).epsilon(1e-13));
  CHECK(lambda_fn(LdContext(3.0), 0.2) == doctest::Approx(0.21945185374934855061).epsilon(1e-12));
  for (double u : {0.3, 0.9, 0.999, 1.0 - 1e-9}) {
    INFO("u=" << u);
    CHECK(lambda_deriv(two, u, 1) == doctest::Approx(lambda1_beta2(u)).epsilon(1e-11));
  }
  // Lambda'' for beta = 2 is d/du artanh(sqrt u)/sqrt u = 1/(2u(1-u)) - artanh(sqrt u)/(2u^1.5).
  const double u = 0.5;
  CHECK(lambda_deriv(two, u, 2) ==
        doctest::Approx(1.0 / (2 * u * (1 - u)) - std::atanh(std::sqrt(u)) / (2 * std::pow(u, 1.5))).epsilon(1e-11));
  CHECK_THROWS_AS(lambda_deriv(two, 1.0, 1), DomainError);
  CHECK_THROWS_AS(lambda_fn(two, 1.5), DomainError);
  CHECK_THROWS_AS(LdContext(1.0), DomainError);
}

TEST_CASE("numerical derivatives agree with the derivative integrals") {
  for (double beta : {1.3, 2.0, 3.0}) {
    const LdContext ctx(beta);
    const double top = 1.0 / (beta - 1.0);
    for (double u : {-3.0, -0.5, 0.2 * top, 0.7 * top}) {
      INFO("beta=" << beta << " u=" << u);
      const double h = 1e-4 * std::max(1.0, std::fabs(u));
      const double d1 = (lambda_fn(ctx, u + h) - lambda_fn(ctx, u - h)) / (2 * h);
      CHECK(d1 == doctest::Approx(lambda_deriv(ctx, u, 1)).epsilon(1e-6));
      const double d2 = (lambda_deriv(ctx, u + h, 1) - lambda_deriv(ctx, u - h, 1)) / (2 * h);
      CHECK(d2 == doctest::Approx(lambda_deriv(ctx, u, 2)).epsilon(1e-6));
      const double d3 = (lambda_deriv(ctx, u + h, 2) - lambda_deriv(ctx, u - h, 2)) / (2 * h);
      CHECK(d3 == doctest::Approx(lambda_deriv(ctx, u, 3)).epsilon(1e-5));
      CHECK(lambda_deriv(ctx, u, 2) > 0.0);
    }
  }
}

TEST_CASE("scaled integral identity") {
  for (double beta : {1.3, 2.0, 3.0}) {
    INFO("beta=" << beta);
    CHECK(std::fabs(scaled_integral_quadrature(beta) - scaled_integral_closed_form(beta)) < 1e-10);
  }
  CHECK(scaled_integral_closed_form(2.0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
}

TEST_CASE("tau against the beta = 2 closed form") {
  const LdContext two(2.0);
  for (double x : {0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    INFO("x=" << x);
    CHECK(std::fabs(tau(two, x) - tau_beta2_oracle(x)) < 1e-8);
  }
  CHECK(tau(two, 2.0) == doctest::Approx(0.916813956124162836).epsilon(1e-12));
  CHECK(rate_I(two, 2.0) == doctest::Approx(0.653047774853847748).epsilon(1e-10));
  CHECK(rate_I(two, 1.2) == doctest::Approx(0.0481992266926231275).epsilon(1e-9));
  CHECK(tau(two, 0.5) == doctest::Approx(-5.43413150584655655).epsilon(1e-11));
  CHECK(rate_I(two, 0.5) == doctest::Approx(0.855448885110076).epsilon(1e-10));
}

TEST_CASE("tau and I for other exponents") {
  for (const TauOracle& o : kTauOracle) {
    const LdContext ctx(o.beta);
    INFO("beta=" << o.beta << " x=" << o.x);
    CHECK(tau(ctx, o.x) == doctest::Approx(o.tau).epsilon(1e-10));
    CHECK(rate_I(ctx, o.x) == doctest::Approx(o.I).epsilon(1e-10));
  }
}

TEST_CASE("integration by parts identity at tau") {
  for (double beta : {1.3, 2.0, 3.0}) {
    const LdContext ctx(beta);
    for (double x : {0.1, 0.3, 0.7, 1.5, 3.0, 8.0}) {
      INFO("beta=" << beta << " x=" << x);
      // log(1 - w tau) is -eta; recomputing it from tau cancels badly near the singularity.
      const RateEval r = evaluate(ctx, x);
      const double rhs = -r.eta + beta * x * r.tau;
      CHECK(std::fabs(lambda_fn(ctx, r.tau) - rhs) <= 1e-8 * std::max(1.0, std::fabs(rhs)));
    }
  }
}

TEST_CASE("rate functions vanish only at one and are convex") {
  for (double beta : {1.3, 2.0, 3.0}) {
    const LdContext ctx(beta);
    INFO("beta=" << beta);
    CHECK(tau(ctx, 1.0) == 0.0);
    CHECK(std::fabs(rate_I(ctx, 1.0)) < 1e-10);
    CHECK(std::fabs(rate_J(ctx, 1.0)) < 1e-10);
    const std::vector<double> g = log_grid(0.02, 50.0, 50);
    double prev_tau = -INFINITY, prev_eta = -INFINITY;
    for (double x : g) {
      const RateEval r = evaluate(ctx, x);
      CHECK(r.tau >= prev_tau);
      CHECK(r.eta > prev_eta);
      prev_tau = r.tau;
      prev_eta = r.eta;
      CHECK(r.I > 0.0);
      CHECK(r.J > 0.0);
    }
    for (std::size_t k = 1; k + 1 < g.size(); ++k) {
      INFO("x=" << g[k]);
      CHECK(rate_I_second_difference(ctx, g[k - 1], g[k], g[k + 1]) > 0.0);
    }
  }
}

TEST_CASE("I'(x) = tau(x)") {
  for (double beta : {1.3, 2.0, 3.0}) {
    const LdContext ctx(beta);
    for (double x : {0.2, 0.8, 1.3, 4.0}) {
      INFO("beta=" << beta << " x=" << x);
      const double h = 1e-4 * x;
      CHECK(rate_I_slope(ctx, x - h, x + h) == doctest::Approx(tau(ctx, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("expansion constants") {
  CHECK(c_of_beta(2.0) == doctest::Approx(std::pow(std::numbers::pi, 2) / 4).epsilon(1e-15));
  CHECK(c_of_beta(3.0) == doctest::Approx(3.7609016190271818526).epsilon(1e-14));
  CHECK(c_of_beta(1.3) == doctest::Approx(1.4717936764003310873).epsilon(1e-13));
  for (double beta : {1.3, 2.0, 3.0}) {
    // c(beta) = (beta-1) Q(beta)^(beta/(beta-1)) with Q the scaled integral.
    const double q = scaled_integral_quadrature(beta);
    CHECK(c_of_beta(beta) == doctest::Approx((beta - 1.0) * std::pow(q, beta / (beta - 1.0))).epsilon(1e-12));
    CHECK(b_of_beta(beta) == doctest::Approx(c_of_beta(beta) / (beta - 1.0)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(c_of_beta(1.0), DomainError);
}

TEST_CASE("small and large x expansions") {
  for (double beta : {1.3, 2.0, 3.0}) {
    const LdContext ctx(beta);
    INFO("beta=" << beta);
    // Small x: remainders shrink. I grows like x^(-1/(beta-1)), so for beta = 1.3 its o(1)
    // remainder drops below rounding already near x = 0.01.
    const std::vector<double> xi = beta < 1.5 ? std::vector<double>{0.3, 0.1, 0.03} : std::vector<double>{1e-2, 1e-3, 1e-4};
    double prev = INFINITY;
    for (double x : xi) {
      const double d = std::fabs(rate_I(ctx, x) - expansions(ctx, x).I_small);
      CHECK(d < prev);
      prev = d;
    }
    prev = INFINITY;
    for (double x : {1e-2, 1e-3, 1e-4}) {
      const double d = std::fabs(rate_J(ctx, x) - expansions(ctx, x).J_small) / x;
      CHECK(d < prev);
      prev = d;
    }
    CHECK(std::fabs(rate_J(ctx, 1e-3) - expansions(ctx, 1e-3).J_small) < 5e-3);
    // Large x: I(x) - x/(beta-1) tends to -beta K.
    const double limit = -beta * ctx.log_singularity_constant();
    for (double x : {1e3, 1e5, 1e8}) {
      INFO("x=" << x);
      const Expansions e = expansions(ctx, x);
      CHECK(rate_I(ctx, x) - e.I_large == doctest::Approx(limit).epsilon(1e-6));
      CHECK(rate_I(ctx, x) / e.I_large == doctest::Approx(1.0).epsilon(0.03));
    }
    CHECK(rate_J(ctx, 50.0) / expansions(ctx, 50.0).J_large < 1.0);
  }
  const LdContext two(2.0);
  CHECK(two.log_singularity_constant() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(LdContext(1.3).log_singularity_constant() == doctest::Approx(3.08218894055406).epsilon(1e-12));
  CHECK(LdContext(3.0).log_singularity_constant() == doctest::Approx(0.247006250295018).epsilon(1e-12));
}

TEST_CASE("J is x I(x^(beta-1))") {
  const LdContext ctx(3.0);
  for (double x : {0.1, 0.9, 1.7}) {
    CHECK(rate_J(ctx, x) == doctest::Approx(x * rate_I(ctx, x * x)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(rate_I(ctx, 0.0), DomainError);
  CHECK_THROWS_AS(rate_J(ctx, -1.0), DomainError);
}

TEST_CASE("importance-sampling verifier on the hitting-time side") {
  const LdContext two(2.0);
  SimConfig cfg;
  cfg.seed = 404;
  cfg.replicates = 4000;
  const LdReport rep = verify_thm3(two, RateModel::kingman(), 2.0, {25, 50}, cfg);
  REQUIRE(rep.points.size() == 2);
  CHECK(rep.target == doctest::Approx(0.653047774853847748));
  for (const LdPoint& p : rep.points) {
    CHECK(p.index == p.n);
    CHECK(p.x_eff == 2.0);
    CHECK(p.theta == doctest::Approx(0.916813956124162836 * p.n * p.n / 2.0));
    CHECK(p.relative_se < 0.1 * p.naive_relative_se);
    CHECK(p.gap < 0.35);
  }
  const LdReport one = verify_thm3(two, RateModel::kingman(), 1.0, {20}, cfg);
  CHECK(one.target == 0.0);
  CHECK(one.points[0].theta == 0.0);
  CHECK(one.points[0].rate < 0.05);
  CHECK_THROWS_AS(verify_thm3(two, RateModel::kingman(), 2.0, {}, cfg), DomainError);
}

TEST_CASE("importance-sampling verifier on the population side") {
  const LdContext two(2.0);
  SimConfig cfg;
  cfg.seed = 405;
  cfg.replicates = 4000;
  const LdReport rep = verify_thm3(two, RateModel::kingman(), 1.5, {20, 40}, cfg, LdSide::Population);
  CHECK(rep.target == doctest::Approx(rate_J(two, 1.5)));
  for (const LdPoint& p : rep.points) {
    CHECK(p.index == static_cast<std::int64_t>(std::floor(1.5 * p.n)));
    CHECK(p.x_eff == doctest::Approx(double(p.index) / double(p.n)));
    CHECK(p.hits > 100);
    CHECK(p.rate > 0.0);
  }
}
