#include "cdi/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cdi/errors.hpp"
#include "cdi/numerics.hpp"
#include "cdi/tail_analysis.hpp"

namespace cdi {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int64_t index_cap(const SimConfig& cfg) { return cfg.max_index.value_or(max_index_from_env()); }

void check_config(const SimConfig& cfg) {
  if (cfg.replicates < 1) throw DomainError(fmt::format("replicates must be >= 1, got {}", cfg.replicates));
  if (!(cfg.trunc_tol > 0.0)) throw DomainError(fmt::format("trunc_tol must be positive, got {}", cfg.trunc_tol));
}

double tail_sd(const RateModel& model, std::int64_t n) {
  return tail_moments(model, n, 1e-6 * model.inverse_rate(n + 1)).B;
}

}  // namespace

std::string_view to_string(ResidualPolicy p) {
  return p == ResidualPolicy::MeanSubstitute ? "mean_substitute" : "drop";
}

Rng replicate_stream(std::uint64_t seed, std::uint64_t replicate) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state = a ^ (replicate * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  return Rng(splitmix64(state));
}

Truncation make_truncation(const RateModel& model, std::int64_t n, const SimConfig& cfg, std::int64_t min_level) {
  check_config(cfg);
  if (n < 1) throw DomainError(fmt::format("truncation requires n >= 1, got {}", n));
  const std::int64_t cap = index_cap(cfg);
  const double target = cfg.trunc_tol * tail_sd(model, n);

  std::int64_t lo = std::max(n + 1, min_level);
  if (lo > cap) throw TruncationError(fmt::format("state {} is beyond the index cap {}", lo, cap));
  std::int64_t hi = lo;
  std::int64_t below = lo - 1;  // largest index known to violate the bound
  while (tail_sd(model, hi) > target) {
    if (hi >= cap) {
      throw TruncationError(
          fmt::format("no truncation level below {} reaches B_K <= {:.6g} (trunc_tol {} at n = {})", cap, target,
                      cfg.trunc_tol, n));
    }
    below = hi;
    hi = std::min(2 * hi, cap);
  }
  while (hi - below > 1) {
    const std::int64_t mid = below + (hi - below) / 2;
    if (mid >= lo && tail_sd(model, mid) <= target) {
      hi = mid;
    } else {
      below = mid;
    }
  }
  Truncation tr;
  tr.n = n;
  tr.K = hi;
  tr.residual_mean = tail_mean(model, hi);
  tr.residual_sd = tail_sd(model, hi);
  tr.g = model.inverse_rates(n + 1, hi);
  return tr;
}

Truncation time_truncation(const RateModel& model, double t, const SimConfig& cfg) {
  const std::int64_t v = speed(model, t, index_cap(cfg));
  Truncation tr = make_truncation(model, v, cfg, 2 * v);
  tr.n = 1;
  tr.g = model.inverse_rates(2, tr.K);
  return tr;
}

double PathSample::T(std::int64_t m) const {
  if (m < n_low || m > n_high) throw DomainError(fmt::format("state {} outside [{}, {}]", m, n_low, n_high));
  return hitting_times[static_cast<std::size_t>(m - n_low)];
}

std::int64_t PathSample::Z(double t) const {
  if (hitting_times.back() > t) {
    throw DomainError(fmt::format("Z({}) lies above the sampled window [{}, {}]", t, n_low, n_high));
  }
  // hitting_times is decreasing in m; find the smallest m with T_m <= t.
  auto it = std::partition_point(hitting_times.begin(), hitting_times.end(), [t](double T) { return T > t; });
  return n_low + (it - hitting_times.begin());
}

double sample_hitting_time(const Truncation& tr, ResidualPolicy policy, Rng& rng) {
  double s = 0.0;
  for (double g : tr.g) s += exp_draw(rng, g);
  return policy == ResidualPolicy::MeanSubstitute ? s + tr.residual_mean : s;
}

double sample_hitting_time(const RateModel& model, std::int64_t n, const SimConfig& cfg, Rng& rng) {
  return sample_hitting_time(make_truncation(model, n, cfg), cfg.residual, rng);
}

PathSample sample_path(const RateModel& model, std::int64_t n_low, std::int64_t n_high, const SimConfig& cfg,
                       Rng& rng) {
  if (n_low < 1 || n_high < n_low) throw DomainError(fmt::format("invalid window [{}, {}]", n_low, n_high));
  const Truncation tr = make_truncation(model, n_high, cfg);
  const std::vector<double> g = model.inverse_rates(n_low + 1, tr.K);
  PathSample p;
  p.n_low = n_low;
  p.n_high = n_high;
  p.trunc_level = tr.K;
  p.residual_policy = cfg.residual;
  p.hitting_times.assign(static_cast<std::size_t>(n_high - n_low + 1), 0.0);
  double T = cfg.residual == ResidualPolicy::MeanSubstitute ? tr.residual_mean : 0.0;
  for (std::int64_t m = tr.K - 1; m >= n_low; --m) {
    T += exp_draw(rng, g[static_cast<std::size_t>(m - n_low)]);  // X_{m+1}
    if (m <= n_high) p.hitting_times[static_cast<std::size_t>(m - n_low)] = T;
  }
  return p;
}

std::int64_t sample_Z(const Truncation& tr, ResidualPolicy policy, double t, Rng& rng) {
  if (tr.n != 1) throw DomainError("Z(t) needs a truncation covering states down to 2");
  double T = policy == ResidualPolicy::MeanSubstitute ? tr.residual_mean : 0.0;
  if (T > t) throw TruncationError(fmt::format("truncation level {} starts after t = {}", tr.K, t));
  for (std::int64_t m = tr.K; m >= 2; --m) {
    T += exp_draw(rng, tr.g[static_cast<std::size_t>(m - 2)]);  // X_m
    if (T > t) return m;
  }
  return 1;
}

std::int64_t sample_Z(const RateModel& model, double t, const SimConfig& cfg, Rng& rng) {
  return sample_Z(time_truncation(model, t, cfg), cfg.residual, t, rng);
}

std::vector<double> sample_hitting_times(const RateModel& model, std::int64_t n, const SimConfig& cfg) {
  const Truncation tr = make_truncation(model, n, cfg);
  return run_replicates<double>(
      cfg, [&](std::int64_t, Rng& rng) { return sample_hitting_time(tr, cfg.residual, rng); });
}

std::vector<std::int64_t> sample_Z_many(const RateModel& model, double t, const SimConfig& cfg) {
  if (!(t > 0.0)) throw DomainError(fmt::format("Z(t) requires t > 0, got {}", t));
  const Truncation tr = time_truncation(model, t, cfg);
  return run_replicates<std::int64_t>(cfg,
                                      [&](std::int64_t, Rng& rng) { return sample_Z(tr, cfg.residual, t, rng); });
}

EstimateCI summarize(std::span<const double> values, std::uint64_t seed) {
  if (values.empty()) throw DomainError("cannot summarize an empty sample");
  const double n = static_cast<double>(values.size());
  EstimateCI out;
  out.point = pairwise_sum(values) / n;
  out.std_error = values.size() > 1 ? std::sqrt(sample_variance(values) / n) : 0.0;
  out.replicates = static_cast<std::int64_t>(values.size());
  out.seed = seed;
  return out;
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw DomainError("sample variance needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / n;
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(), [mean](double v) { return (v - mean) * (v - mean); });
  return pairwise_sum(sq) / (n - 1.0);
}

double log_mgf(const RateModel& model, std::int64_t n, double u) {
  if (n < 1) throw DomainError(fmt::format("mgf requires n >= 1, got {}", n));
  if (!std::isfinite(u)) throw DomainError("mgf argument must be finite");
  if (u == 0.0) return 0.0;
  const std::int64_t cap = max_index_from_env();
  CompensatedSum acc;
  std::int64_t i = n + 1;
  // Explicit terms until u/lambda_i is small, then the cubic expansion of -log(1 - u g) on the tail.
  for (;; ++i) {
    const double g = model.inverse_rate(i);
    const double ug = u * g;
    if (ug >= 1.0) {
      throw TiltDomainError(fmt::format("mgf diverges: u = {} >= lambda_{} = {}", u, i, 1.0 / g));
    }
    acc.add(-std::log1p(-ug));
    if (i >= n + 16 && std::fabs(ug) <= 1e-4) break;
    if (i >= cap) throw NonConvergenceError("mgf tail could not be certified", cap);
  }
  const double au = std::fabs(u);
  const double tol = 1e-15 * std::max(1.0, std::fabs(acc.value())) / au;
  const TailStats s = tail_moments(model, i, tol);
  const double b2 = s.B * s.B;
  const double c3 = s.C * s.C * s.C;
  return acc.value() + u * s.A + u * u * b2 / 2.0 + u * u * u * c3 / 3.0;
}

double mgf(const RateModel& model, std::int64_t n, double u) { return std::exp(log_mgf(model, n, u)); }

TiltedEstimate tilted_estimate(const RateModel& model, std::int64_t n, double x, double theta,
                               const SimConfig& cfg) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(fmt::format("x must be positive, got {}", x));
  if (!std::isfinite(theta)) throw DomainError("tilt must be finite");
  const Truncation tr = make_truncation(model, n, cfg);

  CompensatedSum head;  // log M_n(theta) - log M_K(theta)
  std::vector<double> tilted(tr.g.size());
  for (std::size_t k = 0; k < tr.g.size(); ++k) {
    const double tg = theta * tr.g[k];
    if (!(tg < 1.0)) {
      throw TiltDomainError(fmt::format("tilted rate lambda_{} - theta is not positive (theta = {})",
                                        tr.n + 1 + static_cast<std::int64_t>(k), theta));
    }
    head.add(-std::log1p(-tg));
    tilted[k] = tr.g[k] / (1.0 - tg);
  }
  const double log_head = head.value();
  const double threshold = x * tail_mean(model, n);
  const double residual = cfg.residual == ResidualPolicy::MeanSubstitute ? tr.residual_mean : 0.0;
  const bool upper = x >= 1.0;

  struct Draw {
    double log_weight = 0.0;
    char hit = 0;
  };
  const std::vector<Draw> draws = run_replicates<Draw>(cfg, [&](std::int64_t, Rng& rng) {
    double s = 0.0;
    for (double m : tilted) s += exp_draw(rng, m);
    const double T = s + residual;
    Draw d;
    d.hit = static_cast<char>(upper ? T > threshold : T < threshold);
    d.log_weight = log_head - theta * s;
    return d;
  });

  TiltedEstimate out;
  out.n = n;
  out.x = x;
  out.theta = theta;
  out.upper = upper;
  out.trunc_level = tr.K;
  out.estimate.replicates = cfg.replicates;
  out.estimate.seed = cfg.seed;

  double peak = -std::numeric_limits<double>::infinity();
  for (const Draw& d : draws) {
    if (d.hit) {
      peak = std::max(peak, d.log_weight);
      ++out.hits;
    }
  }
  out.degenerate = out.hits == 0 || out.hits == cfg.replicates;
  if (out.hits == 0) {
    out.log_point = -std::numeric_limits<double>::infinity();
    out.relative_se = std::numeric_limits<double>::infinity();
    return out;
  }
  std::vector<double> w(draws.size(), 0.0), w2(draws.size(), 0.0);
  for (std::size_t r = 0; r < draws.size(); ++r) {
    if (!draws[r].hit) continue;
    w[r] = std::exp(draws[r].log_weight - peak);
    w2[r] = w[r] * w[r];
  }
  const double N = static_cast<double>(cfg.replicates);
  const double s1 = pairwise_sum(w);
  const double s2 = pairwise_sum(w2);
  const double mean = s1 / N;
  const double var = N > 1 ? std::max(0.0, (s2 - N * mean * mean) / (N - 1.0)) : 0.0;
  const double se = std::sqrt(var / N);
  out.log_point = peak + std::log(mean);
  out.estimate.point = std::exp(out.log_point);
  out.estimate.std_error = std::exp(peak) * se;
  out.relative_se = se / mean;
  out.ess = s1 * s1 / s2;
  return out;
}

}  // namespace cdi
