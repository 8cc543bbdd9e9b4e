#include "cdi/tail_analysis.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "cdi/errors.hpp"
#include "cdi/numerics.hpp"

namespace cdi {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double ipow(double g, int p) {
  switch (p) {
    case 1: return g;
    case 2: return g * g;
    default: return g * g * g;
  }
}

TailEstimate continuous_tail(const RateModel& model, std::int64_t N, int p) {
  const double n = static_cast<double>(N);
  auto f = [&](double y) { return ipow(model.inverse_rate_at(y), p); };
  // y = N/s maps (N, inf) onto (0, 1); dy = (y^2/N) ds.
  const QuadResult q = integrate_unit(
      [&](double s, double) {
        const double y = n / s;
        const double fy = f(y);
        if (fy == 0.0) return 0.0;
        return fy * (y / n) * y;
      },
      1e-13);
  const double h = 0.5;
  const double fm2 = f(n - 2 * h), fm1 = f(n - h), f0 = f(n), fp1 = f(n + h), fp2 = f(n + 2 * h);
  const double d1 = (fp1 - fm1) / (2 * h);
  const double d3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * h * h * h);
  TailEstimate out;
  out.value = q.value - f0 / 2.0 - d1 / 12.0;
  out.error = std::fabs(d3) / 720.0 + q.error + 4 * kEps * std::fabs(q.value) + 8 * kEps * f0;
  return out;
}

TailEstimate power_law_tail(const RateModel& model, std::int64_t N, int p) {
  const double fN = ipow(model.inverse_rate(N), p);
  const double f2N = ipow(model.inverse_rate(2 * N), p);
  const double fhN = ipow(model.inverse_rate(N / 2), p);
  const double ratio = static_cast<double>(N) / static_cast<double>(N / 2);
  const double q = std::log(fN / f2N) / std::log(2.0);
  const double q_prev = std::log(fhN / fN) / std::log(ratio);
  if (!(q > 1.0) || !std::isfinite(q)) {
    throw NonConvergenceError("inverse rates do not decay fast enough to certify the tail", N);
  }
  const double n = static_cast<double>(N);
  const double integral = n * fN / (q - 1.0);
  const double d1 = -q * fN / n;
  TailEstimate out;
  out.value = integral - fN / 2.0 - d1 / 12.0;
  out.error = integral * std::fabs(q - q_prev) / (q - 1.0) + q * (q + 1) * (q + 2) * fN / (720 * n * n * n) +
              8 * kEps * integral;
  return out;
}

struct PowerSums {
  std::array<double, 3> value{};
  std::array<double, 3> error{};
};

// sum_{i>n} g_i^p for the powers with a finite target; targets are absolute errors.
PowerSums power_sums(const RateModel& model, std::int64_t n, std::array<double, 3> target,
                     std::int64_t max_index) {
  const bool exact_a = model.has_exact_tail();
  std::array<bool, 3> need{};
  for (int p = 0; p < 3; ++p) need[p] = std::isfinite(target[p]) && !(p == 0 && exact_a);

  std::int64_t N = n + 16;
  if (N > max_index) throw NonConvergenceError(fmt::format("state {} is beyond the index horizon", n), max_index);
  std::array<TailEstimate, 3> tail{};
  for (;;) {
    bool ok = true;
    for (int p = 0; p < 3; ++p) {
      if (!need[p]) continue;
      tail[p] = tail_power_estimate(model, N, p + 1);
      if (!(tail[p].error <= target[p])) ok = false;
    }
    if (ok) break;
    if (N >= max_index) {
      throw NonConvergenceError(fmt::format("tail sums beyond n = {} could not be certified", n), max_index);
    }
    N = std::min(2 * N, max_index);
  }

  std::array<CompensatedSum, 3> acc;
  for (std::int64_t i = N; i > n; --i) {
    const double g = model.inverse_rate(i);
    acc[0].add(g);
    acc[1].add(g * g);
    acc[2].add(g * g * g);
  }
  PowerSums out;
  for (int p = 0; p < 3; ++p) {
    if (!std::isfinite(target[p])) continue;
    if (p == 0 && exact_a) {
      out.value[0] = model.exact_tail(n);
      out.error[0] = 0.0;
      continue;
    }
    out.value[p] = acc[p].value() + tail[p].value;
    out.error[p] = tail[p].error + 4 * kEps * out.value[p];
  }
  return out;
}

double head_lower_bound(const RateModel& model, std::int64_t n) {
  CompensatedSum s;
  for (std::int64_t i = n + 1; i <= n + 16; ++i) s.add(model.inverse_rate(i));
  return s.value();
}

}  // namespace

TailEstimate tail_power_estimate(const RateModel& model, std::int64_t N, int p) {
  if (p < 1 || p > 3) throw DomainError(fmt::format("tail power must be 1, 2 or 3, got {}", p));
  if (N < 16) throw DomainError(fmt::format("tail estimates start at N >= 16, got {}", N));
  return model.has_continuous_form() ? continuous_tail(model, N, p) : power_law_tail(model, N, p);
}

TailStats tail_moments(const RateModel& model, std::int64_t n, double tol) {
  if (n < 1) throw DomainError(fmt::format("tail moments require n >= 1, got {}", n));
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  const double g = model.inverse_rate(n + 1);  // lower bound for A, B and C
  // |dB| ~ |d(B^2)| / 2B and |dC| ~ |d(C^3)| / 3C^2.
  const std::array<double, 3> target{tol, 2.0 * g * tol, 3.0 * g * g * tol};
  const PowerSums s = power_sums(model, n, target, max_index_from_env());
  TailStats out;
  out.n = n;
  out.A = s.value[0];
  out.B = std::sqrt(s.value[1]);
  out.C = std::cbrt(s.value[2]);
  out.err_bound = s.error[0];
  return out;
}

double tail_mean(const RateModel& model, std::int64_t n) {
  if (n < 1) throw DomainError(fmt::format("tail mean requires n >= 1, got {}", n));
  if (model.has_exact_tail()) return model.exact_tail(n);
  const double inf = std::numeric_limits<double>::infinity();
  const double lower = head_lower_bound(model, n);
  return power_sums(model, n, {1e-14 * lower, inf, inf}, max_index_from_env()).value[0];
}

std::int64_t speed(const RateModel& model, double t, std::optional<std::int64_t> max_index) {
  if (!(t > 0.0)) throw DomainError(fmt::format("speed requires t > 0, got {}", t));
  const std::int64_t bound = max_index.value_or(max_index_from_env());
  if (t >= tail_mean(model, 1)) return 1;
  std::int64_t lo = 1;  // A_lo > t
  std::int64_t hi = 2;
  while (tail_mean(model, hi) > t) {
    lo = hi;
    if (hi >= bound) throw IndexOverflowError(fmt::format("v({}) exceeds the maximum index", t), bound);
    hi = std::min(2 * hi, bound);
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (tail_mean(model, mid) > t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double scaling_ratio(const RateModel& model, std::int64_t n, double x,
                     const std::function<double(std::int64_t)>& b) {
  if (n < 1) throw DomainError("scaling ratio requires n >= 1");
  const double bn = b ? b(n) : std::sqrt(static_cast<double>(n));
  const auto m = static_cast<std::int64_t>(std::floor(static_cast<double>(n) + x * bn));
  if (m < 1) throw DomainError("shifted index n + x b_n falls below 1");
  CompensatedSum diff;  // A_n - A_m without cancellation
  if (m > n) {
    for (std::int64_t i = n + 1; i <= m; ++i) diff.add(model.inverse_rate(i));
  } else {
    for (std::int64_t i = m + 1; i <= n; ++i) diff.add(-model.inverse_rate(i));
  }
  const double g = model.inverse_rate(m + 1);
  const TailStats s = tail_moments(model, m, 1e-9 * g);
  return diff.value() / s.B;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Consistent: return "consistent";
    case Verdict::Inconsistent: return "inconsistent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

const ConditionTrajectory& ConditionReport::at(std::string_view condition_id) const {
  for (const auto& c : conditions) {
    if (c.condition_id == condition_id) return c;
  }
  throw DomainError(fmt::format("no diagnostic named '{}'", condition_id));
}

namespace {

// Index of the last sample at or below n_last / 10, or 0.
std::size_t decade_back(const std::vector<TrajectoryPoint>& s) {
  const std::int64_t limit = s.back().n / 10;
  std::size_t j = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k].n <= limit) j = k;
  }
  return j;
}

Verdict judge_limit(const std::vector<TrajectoryPoint>& s, double limit, double scale) {
  if (s.size() < 4) return Verdict::Inconclusive;
  const std::size_t k = s.size();
  auto dist = [&](std::size_t i) { return std::fabs(s[i].value - limit); };
  const bool settled = dist(k - 1) <= 1e-10 * scale && dist(k - 2) <= 1e-10 * scale;
  const bool monotone = settled || (dist(k - 3) >= dist(k - 2) && dist(k - 2) >= dist(k - 1));
  if (monotone && dist(k - 1) <= 0.2 * scale) return Verdict::Consistent;
  const std::size_t j = decade_back(s);
  if (dist(k - 1) > 2.0 * dist(j) && dist(k - 1) > 0.2 * scale) return Verdict::Inconsistent;
  return Verdict::Inconclusive;
}

Verdict judge_zero(const std::vector<TrajectoryPoint>& s) {
  if (s.empty()) return Verdict::Inconclusive;
  return judge_limit(s, 0.0, std::fabs(s.front().value));
}

// limsup < 1: values must stay clearly below one.
Verdict judge_below_one(const std::vector<TrajectoryPoint>& s) {
  if (s.size() < 4) return Verdict::Inconclusive;
  const std::size_t k = s.size();
  const double worst = std::max({s[k - 3].value, s[k - 2].value, s[k - 1].value});
  if (worst <= 0.8) return Verdict::Consistent;
  const std::size_t j = decade_back(s);
  if (s[k - 1].value > 0.8 && (1.0 - s[k - 1].value) < 0.5 * (1.0 - s[j].value)) return Verdict::Inconsistent;
  return Verdict::Inconclusive;
}

// Partial sums that should converge.
Verdict judge_summable(const std::vector<TrajectoryPoint>& s) {
  if (s.size() < 4) return Verdict::Inconclusive;
  const std::size_t k = s.size();
  const std::size_t j = decade_back(s);
  const double last = s[k - 1].value;
  const double inc1 = s[k - 1].value - s[k - 2].value;
  const double inc2 = s[k - 2].value - s[k - 3].value;
  if (last - s[j].value <= 0.2 * last && inc1 <= inc2) return Verdict::Consistent;
  if (last > 2.0 * s[j].value) return Verdict::Inconsistent;
  return Verdict::Inconclusive;
}

Verdict judge_worst(std::initializer_list<Verdict> vs) {
  bool all_consistent = true;
  for (Verdict v : vs) {
    if (v == Verdict::Inconsistent) return Verdict::Inconsistent;
    if (v != Verdict::Consistent) all_consistent = false;
  }
  return all_consistent ? Verdict::Consistent : Verdict::Inconclusive;
}

bool normal_positive(double v) { return v >= DBL_MIN && std::isfinite(v); }

}  // namespace

ConditionReport condition_diagnostics(const RateModel& model, std::int64_t horizon, int points) {
  if (horizon < 100) throw DomainError(fmt::format("diagnostics horizon must be >= 100, got {}", horizon));
  if (points < 4) throw DomainError("diagnostics need at least 4 sample points");
  const std::int64_t max_index = max_index_from_env();
  horizon = std::min(horizon, (max_index - 32) / 4);
  const std::int64_t H = horizon;
  const std::int64_t top = 4 * H + 2;

  // Requested sample points, log-spaced in [8, H].
  std::vector<std::int64_t> grid;
  for (int k = 0; k < points; ++k) {
    const double e = std::log(8.0) + (std::log(static_cast<double>(H)) - std::log(8.0)) * k / (points - 1);
    const auto n = static_cast<std::int64_t>(std::llround(std::exp(e)));
    if (grid.empty() || n > grid.back()) grid.push_back(n);
  }
  const std::array<double, 3> rxr_x{1.5, 2.0, 4.0};
  std::set<std::int64_t> far_needed;
  for (std::int64_t n : grid) {
    for (double x : rxr_x) far_needed.insert(static_cast<std::int64_t>(std::floor(static_cast<double>(n) * x)));
  }

  // Inverse rates g[i] for i in [2, H + 2]; A, B^2, C^3 for i in [1, H + 1].
  std::vector<double> g(static_cast<std::size_t>(H + 3), 0.0);
  std::vector<double> A(static_cast<std::size_t>(H + 2), 0.0);
  std::vector<double> B2(static_cast<std::size_t>(H + 2), 0.0);
  std::vector<double> C3(static_cast<std::size_t>(H + 2), 0.0);
  std::map<std::int64_t, double> far_A;

  const double inf = std::numeric_limits<double>::infinity();
  const double g_top = model.inverse_rate(top + 1);
  PowerSums top_tail =
      power_sums(model, top, {1e-12 * g_top * static_cast<double>(top), inf, inf}, max_index);
  CompensatedSum a_acc;
  a_acc.add(top_tail.value[0]);
  for (std::int64_t i = top; i >= 1; --i) {
    const double gi = model.inverse_rate(i + 1);
    a_acc.add(gi);
    const double a_i = model.has_exact_tail() ? model.exact_tail(i) : a_acc.value();
    if (i <= H + 1) {
      A[static_cast<std::size_t>(i)] = a_i;
      g[static_cast<std::size_t>(i + 1)] = gi;
    } else if (far_needed.count(i) != 0) {
      far_A[i] = a_i;
    }
  }
  {
    const double gh = g[static_cast<std::size_t>(H + 2)];
    PowerSums t2 = power_sums(model, H + 1, {inf, 1e-12 * gh * gh * static_cast<double>(H), 1e-12 * gh * gh * gh * H},
                              max_index);
    CompensatedSum b_acc, c_acc;
    b_acc.add(t2.value[1]);
    c_acc.add(t2.value[2]);
    B2[static_cast<std::size_t>(H + 1)] = t2.value[1];
    C3[static_cast<std::size_t>(H + 1)] = t2.value[2];
    for (std::int64_t i = H; i >= 1; --i) {
      const double gi = g[static_cast<std::size_t>(i + 1)];
      b_acc.add(gi * gi);
      c_acc.add(gi * gi * gi);
      B2[static_cast<std::size_t>(i)] = b_acc.value();
      C3[static_cast<std::size_t>(i)] = c_acc.value();
    }
  }
  auto A_at = [&](std::int64_t i) {
    if (i <= H + 1) return A[static_cast<std::size_t>(i)];
    return far_A.at(i);
  };

  // Drop samples whose denominators underflow.
  std::vector<std::int64_t> ns;
  for (std::int64_t n : grid) {
    const auto k = static_cast<std::size_t>(n);
    if (normal_positive(A[k]) && normal_positive(g[k]) && normal_positive(g[k + 1]) && normal_positive(B2[k]) &&
        normal_positive(C3[k])) {
      ns.push_back(n);
    } else {
      break;
    }
  }
  if (ns.size() < 4) throw NumericError("too few diagnostic samples before the tail sums underflow");

  ConditionReport report;
  report.model = model.name();
  report.horizon = ns.back();

  auto trajectory = [&](std::string id, Condition c, auto&& value_at) {
    ConditionTrajectory t{std::move(id), c, {}, Verdict::Inconclusive, {}};
    for (std::int64_t n : ns) t.samples.push_back({n, value_at(n)});
    return t;
  };
  auto gi = [&](std::int64_t i) { return g[static_cast<std::size_t>(i)]; };

  // lambda_n / lambda_{n+1} = g_{n+1} / g_n
  auto ratio = trajectory("c2", Condition::C2, [&](std::int64_t n) { return gi(n + 1) / gi(n); });
  const double alpha_target = model.info().alpha.value_or(std::min(ratio.samples.back().value, 1.0));
  if (alpha_target < 0.95) {
    ratio.verdict = judge_limit(ratio.samples, alpha_target, std::max(alpha_target, 0.05));
  } else {
    ratio.verdict = judge_below_one(ratio.samples);
  }
  ratio.target = alpha_target;
  auto a1 = ratio;
  a1.condition_id = "a1";
  a1.condition = Condition::A1;
  a1.verdict = judge_limit(a1.samples, 1.0, 1.0);
  a1.target = 1.0;

  std::vector<ConditionTrajectory> out{ratio, a1};

  std::vector<ConditionTrajectory> rxr;
  for (double x : rxr_x) {
    auto t = trajectory(fmt::format("Rxr[x={}]", x), Condition::Rxr, [&](std::int64_t n) {
      return A_at(static_cast<std::int64_t>(std::floor(static_cast<double>(n) * x))) / A_at(n);
    });
    t.verdict = judge_below_one(t.samples);
    rxr.push_back(t);
  }
  auto rxr_all = rxr[1];
  rxr_all.condition_id = "Rxr";
  rxr_all.verdict = judge_worst({rxr[0].verdict, rxr[1].verdict, rxr[2].verdict});
  out.insert(out.end(), rxr.begin(), rxr.end());
  out.push_back(rxr_all);

  auto a11 = rxr[1];
  a11.condition_id = "a11";
  a11.condition = Condition::A11;
  a11.verdict = judge_zero(a11.samples);
  a11.target = 0.0;
  out.push_back(a11);

  auto fast = trajectory("fast_regime", Condition::C2, [&](std::int64_t n) { return gi(n + 1) / A_at(n); });
  if (alpha_target < 0.95) {
    fast.target = 1.0 - alpha_target;
    fast.verdict = judge_limit(fast.samples, 1.0 - alpha_target, 1.0 - alpha_target);
  } else {
    fast.target = 0.0;
    fast.verdict = judge_zero(fast.samples);
  }
  out.push_back(fast);

  auto boa = trajectory("BoA", Condition::BoA, [&](std::int64_t n) { return gi(n) / A_at(n); });
  boa.verdict = judge_zero(boa.samples);
  boa.target = 0.0;
  out.push_back(boa);

  auto boan = trajectory("BoAn", Condition::BoAn,
                         [&](std::int64_t n) { return std::sqrt(B2[static_cast<std::size_t>(n)]) / A_at(n); });
  boan.verdict = judge_zero(boan.samples);
  boan.target = 0.0;
  out.push_back(boan);

  // Partial sums of (lambda_{i+1} A_{floor(i(1-eps))})^{-2}; eps = 0 is (cond1).
  auto partial_sums = [&](std::string id, Condition c, double eps) {
    std::vector<double> running;
    CompensatedSum acc;
    std::size_t next = 0;
    ConditionTrajectory t{std::move(id), c, {}, Verdict::Inconclusive, {}};
    for (std::int64_t i = 1; i <= ns.back(); ++i) {
      const auto j = static_cast<std::int64_t>(std::floor(static_cast<double>(i) * (1.0 - eps)));
      if (j >= 1) {
        const double r = gi(i + 1) / A_at(j);
        acc.add(r * r);
      }
      if (next < ns.size() && i == ns[next]) {
        t.samples.push_back({i, acc.value()});
        ++next;
      }
    }
    t.verdict = judge_summable(t.samples);
    return t;
  };
  out.push_back(partial_sums("cond1", Condition::Cond1, 0.0));
  auto c1e_a = partial_sums("cond1e[eps=0.1]", Condition::Cond1e, 0.1);
  auto c1e_b = partial_sums("cond1e[eps=0.5]", Condition::Cond1e, 0.5);
  out.push_back(c1e_a);
  out.push_back(c1e_b);

  auto cond2 = trajectory("cond2", Condition::Cond2, [&](std::int64_t n) {
    return std::cbrt(C3[static_cast<std::size_t>(n)]) / std::sqrt(B2[static_cast<std::size_t>(n)]);
  });
  cond2.verdict = judge_zero(cond2.samples);
  cond2.target = 0.0;
  out.push_back(cond2);

  if (model.info().beta) {
    const double beta = *model.info().beta;
    // A_n n^{beta-1} L(n) (beta-1) with L(n) = lambda_n n^{-beta}.
    auto crv = trajectory("crv", Condition::Crv, [&](std::int64_t n) {
      return (beta - 1.0) * A_at(n) / (gi(n) * static_cast<double>(n));
    });
    crv.verdict = judge_limit(crv.samples, 1.0, 1.0);
    crv.target = 1.0;
    out.push_back(crv);
  }

  report.conditions = std::move(out);
  return report;
}

}  // namespace cdi
