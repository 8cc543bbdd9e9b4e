#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/trigamma.hpp>

#include "cdi/errors.hpp"
#include "cdi/numerics.hpp"
#include "cdi/tail_analysis.hpp"

using namespace cdi;

namespace {

// Brute-force sums over (n, n + terms] for models whose remainder is negligible.
struct Brute {
  double A = 0, B2 = 0, C3 = 0, R = 0;  // R = 2 sum g_i A_i
};

Brute brute(const RateModel& m, int n, int terms) {
  std::vector<double> g(static_cast<std::size_t>(terms) + 1, 0.0);
  for (int k = 1; k <= terms; ++k) g[static_cast<std::size_t>(k)] = m.inverse_rate(n + k);
  std::vector<double> a(static_cast<std::size_t>(terms) + 2, 0.0);
  CompensatedSum acc;
  for (int k = terms; k >= 1; --k) {
    a[static_cast<std::size_t>(k)] = acc.value();  // A_{n+k} without the remainder
    acc.add(g[static_cast<std::size_t>(k)]);
  }
  Brute out;
  out.A = acc.value();
  CompensatedSum b, c, r;
  for (int k = 1; k <= terms; ++k) {
    const double gi = g[static_cast<std::size_t>(k)];
    b.add(gi * gi);
    c.add(gi * gi * gi);
    r.add(2.0 * gi * a[static_cast<std::size_t>(k)]);
  }
  out.B2 = b.value();
  out.C3 = c.value();
  out.R = r.value();
  return out;
}

}  // namespace

TEST_CASE("kingman tail moments") {
  const RateModel m = RateModel::kingman();
  const TailStats s = tail_moments(m, 4, 1e-15);
  CHECK(s.A == 0.5);
  CHECK(s.err_bound == 0.0);
  CHECK(s.B * s.B == doctest::Approx(0.0205836458969226029).epsilon(1e-12));
  CHECK(s.C * s.C * s.C == doctest::Approx(0.00149812461846438266).epsilon(1e-12));
  // Closed form 4(psi1(n) + psi1(n+1)) - 8/n at n = 1000.
  const TailStats big = tail_moments(m, 1000);
  const double b2 = 4.0 * (boost::math::trigamma(1000.0) + boost::math::trigamma(1001.0)) - 8.0 / 1000.0;
  CHECK(big.B * big.B == doctest::Approx(b2).epsilon(1e-9));
  CHECK(big.A == 0.002);
  CHECK(big.C <= big.B);
  CHECK(big.B <= big.A);
}

TEST_CASE("continuous tails against independent sums") {
  SUBCASE("regularly varying beta = 2, L = 1: Hurwitz zeta") {
    const TailStats s = tail_moments(RateModel::regularly_varying(2.0), 10, 1e-13);
    CHECK(s.A == doctest::Approx(0.0951663356816857461).epsilon(1e-12));
  }
  SUBCASE("polytail beta = 3") {
    const TailStats s = tail_moments(preset("polytail", {.beta = 3.0}), 10, 1e-12);
    CHECK(s.A == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(s.B * s.B == doctest::Approx(7.95770802030497305e-6).epsilon(1e-10));
  }
  SUBCASE("custom rule falls back to a power-law fit") {
    const RateModel custom = RateModel::custom([](std::int64_t n) { return 0.5 * double(n) * double(n - 1); });
    const TailStats s = tail_moments(custom, 4, 1e-11);
    CHECK(s.A == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(s.B * s.B == doctest::Approx(0.0205836458969226029).epsilon(1e-9));
  }
  SUBCASE("geometric is exact in A") {
    const TailStats s = tail_moments(preset("geometric"), 7);
    CHECK(s.A == std::exp(-7.0));
    const double g2 = std::expm1(1.0) * std::expm1(1.0);
    CHECK(s.B * s.B == doctest::Approx(g2 * std::exp(-16.0) / (1.0 - std::exp(-2.0))).epsilon(1e-12));
  }
}

TEST_CASE("norm ordering C <= B <= A and monotone A") {
  for (const auto& name : preset_names()) {
    const RateModel m = preset(name);
    double prev = tail_mean(m, 1);
    for (std::int64_t n : {2, 5, 20, 100, 400}) {
      const TailStats s = tail_moments(m, n, 1e-9 * m.inverse_rate(n + 1));
      INFO(name << " n=" << n);
      CHECK(s.C <= s.B);
      CHECK(s.B <= s.A);
      CHECK(s.A < prev);
      prev = s.A;
    }
  }
}

TEST_CASE("tail identities hold to 1e-9") {
  SUBCASE("A^2 - B^2 = 2 sum g_i A_i, kingman") {
    const RateModel m = RateModel::kingman();
    for (int n : {2, 10, 100}) {
      const TailStats s = tail_moments(m, n, 1e-14);
      // Truncated brute force plus the closed-form remainder of 2 sum g_i A_i beyond n + terms.
      const int terms = 2'000'000;
      const Brute b = brute(m, n, terms);
      const double far = n + terms;
      const double remainder = 8.0 * (1.0 / far - boost::math::trigamma(far + 1.0)) +
                               2.0 * (2.0 / far) * (b.A);  // cross term from the truncated A_i
      const double lhs = s.A * s.A - s.B * s.B;
      INFO("n=" << n);
      CHECK(std::fabs(lhs - (b.R + remainder)) <= 1e-9 * lhs);
    }
  }
  SUBCASE("A^2 - B^2 = 2 sum g_i A_i, geometric") {
    const RateModel m = preset("geometric");
    for (int n : {2, 10, 100}) {
      const TailStats s = tail_moments(m, n, 1e-16);
      CompensatedSum r;
      for (int i = n + 1; i < n + 800 && i < 740; ++i) r.add(2.0 * m.inverse_rate(i) * m.exact_tail(i));
      const double lhs = s.A * s.A - s.B * s.B;
      INFO("n=" << n);
      CHECK(std::fabs(lhs - r.value()) <= 1e-9 * lhs);
    }
  }
  SUBCASE("lambda_{n+1} A_n = 1 + (lambda_{n+1}/lambda_{n+2}) lambda_{n+2} A_{n+1}") {
    for (const char* name : {"kingman", "geometric", "polytail", "stretched"}) {
      const RateModel m = preset(name);
      for (int n : {2, 10, 100}) {
        const double lhs = m.lambda(n + 1) * tail_mean(m, n);
        const double rhs = 1.0 + (m.lambda(n + 1) / m.lambda(n + 2)) * (m.lambda(n + 2) * tail_mean(m, n + 1));
        INFO(name << " n=" << n);
        CHECK(std::fabs(lhs - rhs) <= 1e-12 * lhs);
      }
    }
  }
}

TEST_CASE("speed") {
  const RateModel k = RateModel::kingman();
  CHECK(speed(k, 2.0 / 1000) == 1000);
  CHECK(speed(k, 2.0) == 1);
  CHECK(speed(k, 50.0) == 1);
  CHECK(speed(k, 1.999) == 2);
  CHECK(speed(preset("geometric"), std::exp(-10.5)) == 11);
  CHECK(speed(preset("geometric"), 1e-5) == 12);
  CHECK_THROWS_AS(speed(k, 0.0), DomainError);
  CHECK_THROWS_AS(speed(k, 2e-9, 1000), IndexOverflowError);
  try {
    (void)speed(k, 2e-9, 1000);
  } catch (const IndexOverflowError& e) {
    CHECK(e.bound() == 1000);
  }
}

TEST_CASE("speed and tail means are dual") {
  for (const char* name : {"kingman", "polytail", "stretched", "loglog", "logpow"}) {
    const RateModel m = preset(name);
    for (std::int64_t n : {2, 3, 17, 256, 5000}) {
      const double a = tail_mean(m, n);
      const double gap = m.inverse_rate(n + 1);
      INFO(name << " n=" << n);
      CHECK(speed(m, a) == n);
      CHECK(speed(m, a - 0.25 * gap) == n + 1);
    }
  }
}

TEST_CASE("scaling ratio for kingman tends to sqrt(3)") {
  const RateModel k = RateModel::kingman();
  const double r = scaling_ratio(k, 10'000, 1.0);
  CHECK(r == doctest::Approx(std::sqrt(3.0)).epsilon(0.02));
  const double r_neg = scaling_ratio(k, 10'000, -1.0);
  CHECK(r_neg == doctest::Approx(-std::sqrt(3.0)).epsilon(0.02));
}

TEST_CASE("non-summable custom tail is refused") {
  const RateModel harmonic = RateModel::custom([](std::int64_t n) { return double(n); });
  CHECK_THROWS_AS(tail_moments(harmonic, 10), NonConvergenceError);
}

TEST_CASE("condition diagnostics") {
  SUBCASE("geometric ratio tends to 1/e") {
    const ConditionReport r = condition_diagnostics(preset("geometric"));
    const auto& c2 = r.at("c2");
    CHECK(c2.verdict == Verdict::Consistent);
    CHECK(c2.samples.back().value == doctest::Approx(1.0 / std::numbers::e).epsilon(1e-9));
    CHECK(r.horizon < 1000);
    CHECK(r.at("a1").verdict != Verdict::Consistent);
    CHECK(r.at("fast_regime").verdict == Verdict::Consistent);
  }
  SUBCASE("kingman B/A vanishes") {
    const ConditionReport r = condition_diagnostics(RateModel::kingman().with_info(preset("kingman").info()));
    CHECK(r.horizon == 1'000'000);
    CHECK(r.at("BoAn").verdict == Verdict::Consistent);
    CHECK(r.at("BoA").verdict == Verdict::Consistent);
    CHECK(r.at("cond2").verdict == Verdict::Consistent);
    CHECK(r.at("Rxr").verdict == Verdict::Consistent);
    CHECK(r.at("crv").verdict == Verdict::Consistent);
    CHECK(r.at("a11").verdict != Verdict::Consistent);
  }
  SUBCASE("logpow C/B vanishes and every ratio is finite") {
    const ConditionReport r = condition_diagnostics(preset("logpow"));
    CHECK(r.at("cond2").verdict == Verdict::Consistent);
    CHECK(r.at("Rxr").verdict != Verdict::Consistent);
    for (const auto& c : r.conditions) {
      for (const auto& p : c.samples) CHECK(std::isfinite(p.value));
    }
  }
  SUBCASE("samples are log-spaced and increasing") {
    const ConditionReport r = condition_diagnostics(preset("stretched"), 10'000, 20);
    const auto& s = r.at("BoA").samples;
    REQUIRE(s.size() == 20);
    for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k].n > s[k - 1].n);
    CHECK(s.front().n == 8);
    CHECK(s.back().n == 10'000);
  }
  CHECK_THROWS_AS(condition_diagnostics(RateModel::kingman(), 50), DomainError);
  CHECK_THROWS_AS(condition_diagnostics(RateModel::kingman()).at("nope"), DomainError);
}
