#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdi/rate_models.hpp"
#include "cdi/simulation.hpp"

namespace cdi {

/// Exponent and numerical settings for the rate functions of a regularly varying model.
class LdContext {
 public:
  explicit LdContext(double beta, double quad_rel_tol = 1e-13, double root_rel_tol = 1e-12);

  double beta() const noexcept { return beta_; }
  double quad_rel_tol() const noexcept { return quad_tol_; }
  double root_rel_tol() const noexcept { return root_tol_; }
  /// Constant in Lambda'(u) ~ (beta-1)(eta/beta + K) as eta = -log(1 - (beta-1)u) -> infinity.
  double log_singularity_constant() const noexcept { return k_; }

 private:
  double beta_;
  double quad_tol_;
  double root_tol_;
  double k_;
};

/// (x, tau(x), I(x), J(x)) for one beta.
struct RateEval {
  double x = 0.0;
  double tau = 0.0;
  double eta = 0.0;  // -log(1 - (beta-1) tau); resolves tau where it rounds to 1/(beta-1)
  double I = 0.0;
  double J = 0.0;
};

/// Lambda(u) = -int_1^inf log(1 - (beta-1) u y^-beta) dy for u <= 1/(beta-1).
double lambda_fn(const LdContext& ctx, double u);

/// Derivative of Lambda of order 1, 2 or 3:
/// Lambda^(k)(u) = (k-1)! int_1^inf dy / ((beta-1)^-1 y^beta - u)^k for u < 1/(beta-1).
double lambda_deriv(const LdContext& ctx, double u, int order);

/// Unique root of Lambda'(tau) = x; tau < 1/(beta-1) and sign(tau) = sign(x - 1).
double tau(const LdContext& ctx, double x);

/// I(x) = -(beta-1) x tau(x) - log(1 - (beta-1) tau(x)).
double rate_I(const LdContext& ctx, double x);
/// J(x) = x I(x^(beta-1)).
double rate_J(const LdContext& ctx, double x);

RateEval evaluate(const LdContext& ctx, double x);

/// (I(b) - I(a)) / (b - a), accurate even where I is numerically linear (large x).
double rate_I_slope(const LdContext& ctx, double a, double b);
/// Second divided difference of I on a < b < c.
double rate_I_second_difference(const LdContext& ctx, double a, double b, double c);

/// c(beta) = ((1 - 1/beta) pi / sin(pi/beta))^(beta/(beta-1)).
double c_of_beta(double beta);
/// c(beta)/(beta-1), the leading coefficient of tau(x) as x -> 0.
double b_of_beta(double beta);

/// int_0^inf dy / ((beta-1)^-1 y^beta + 1) by quadrature, and its closed form.
double scaled_integral_quadrature(double beta);
double scaled_integral_closed_form(double beta);

/// Leading terms of the rate functions for x -> infinity and x -> 0.
struct Expansions {
  double I_large = 0.0;  // x/(beta-1)
  double J_large = 0.0;  // x^beta/(beta-1)
  double I_small = 0.0;  // c x^(-1/(beta-1)) - beta/(beta-1) log(1/x) - log c - beta
  double J_small = 0.0;  // c - (beta log(1/x) + log c + beta) x, i.e. x I_small(x^(beta-1))
};

Expansions expansions(const LdContext& ctx, double x);

enum class LdSide { HittingTime, Population };

std::string_view to_string(LdSide side);

struct LdPoint {
  std::int64_t n = 0;
  std::int64_t index = 0;   // state whose hitting time is estimated
  double x_eff = 0.0;       // event is T_index > x_eff A_index (or < for x_eff < 1)
  double theta = 0.0;
  double log_estimate = 0.0;
  double relative_se = 0.0;
  double naive_relative_se = 0.0;  // sqrt((1 - p)/(N p)) at the same replicate count
  std::int64_t hits = 0;
  bool degenerate = false;
  double rate = 0.0;  // -log(estimate)/n
  double gap = 0.0;   // |rate - target| / target, or |rate| when target = 0
};

struct LdReport {
  LdSide side = LdSide::HittingTime;
  std::string model;
  double beta = 0.0;
  double x = 0.0;
  double target = 0.0;  // I(x) or J(x)
  std::vector<LdPoint> points;
  bool gap_non_increasing = false;
  double final_gap = 0.0;
  std::uint64_t seed = 0;
  std::int64_t replicates = 0;
};

/// Importance-sampling estimates of -n^-1 log P along `ns` compared with I(x) (hitting-time side)
/// or J(x) (population side, evaluated at t = A_n so that v(t) = n).
LdReport verify_thm3(const LdContext& ctx, const RateModel& model, double x, const std::vector<std::int64_t>& ns,
                     const SimConfig& cfg, LdSide side = LdSide::HittingTime);

}  // namespace cdi
