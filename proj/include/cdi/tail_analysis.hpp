#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdi/rate_models.hpp"

namespace cdi {

/// A_n = E T_n, B_n^2 = Var T_n and C_n^3 = sum of cubed inverse rates, at state n.
struct TailStats {
  std::int64_t n = 0;
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double err_bound = 0.0;  // certified absolute error on A
};

/// Sum over i > N of (1/lambda_i)^p together with an error estimate.
struct TailEstimate {
  double value = 0.0;
  double error = 0.0;
};

/// Euler-Maclaurin estimate of sum_{i>N} lambda_i^{-p}, p in {1, 2, 3}.
///
/// Uses quadrature of the continuous extension of 1/lambda when the model has one and a
/// local power-law fit otherwise. The error term assumes the inverse rates are eventually
/// monotone with monotone low-order derivatives beyond N.
TailEstimate tail_power_estimate(const RateModel& model, std::int64_t N, int p);

/// A_n, B_n, C_n with each value within `tol` (absolute) of the infinite series.
/// A uses the closed-form tail when the model carries one.
/// Throws NonConvergenceError when the tail cannot be certified below CDI_MAX_INDEX.
TailStats tail_moments(const RateModel& model, std::int64_t n, double tol = 1e-10);

/// Canonical A_n used by speed(): closed form when available, otherwise certified to
/// 1e-14 relative. Deterministic in (model, n).
double tail_mean(const RateModel& model, std::int64_t n);

/// Speed of coming down from infinity: v(t) = n when A_n <= t < A_{n-1}, and 1 when t >= A_1.
/// Throws IndexOverflowError when v(t) would exceed `max_index` (default CDI_MAX_INDEX).
std::int64_t speed(const RateModel& model, double t, std::optional<std::int64_t> max_index = {});

/// (A_n - A_{n + x b_n}) / B_{n + x b_n}, the scaling ratio whose limit h(x) drives the
/// central limit theorem for Z(t). `b` maps n to b_n and defaults to sqrt(n).
double scaling_ratio(const RateModel& model, std::int64_t n, double x,
                     const std::function<double(std::int64_t)>& b = {});

enum class Verdict { Consistent, Inconsistent, Inconclusive };

std::string_view to_string(Verdict v);

struct TrajectoryPoint {
  std::int64_t n;
  double value;
};

/// Finite-horizon trajectory of one diagnostic quantity.
struct ConditionTrajectory {
  std::string condition_id;
  Condition condition;
  std::vector<TrajectoryPoint> samples;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<double> target;  // limit the verdict was judged against
};

struct ConditionReport {
  std::string model;
  std::int64_t horizon = 0;  // largest n actually sampled
  std::vector<ConditionTrajectory> conditions;

  const ConditionTrajectory& at(std::string_view condition_id) const;
};

/// Diagnostics for every named hypothesis at `points` log-spaced n <= horizon.
///
/// Verdicts are heuristics, never proofs: "consistent" needs the last three samples moving
/// monotonically toward the target and within 20% of it; "inconsistent" needs the
/// trajectory to move away by more than 2x over the last decade. Samples whose
/// denominators underflow are dropped and the horizon shrinks accordingly.
ConditionReport condition_diagnostics(const RateModel& model, std::int64_t horizon = 1'000'000,
                                      int points = 40);

}  // namespace cdi
