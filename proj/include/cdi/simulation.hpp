#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "cdi/rate_models.hpp"

namespace cdi {

enum class ResidualPolicy { MeanSubstitute, Drop };

std::string_view to_string(ResidualPolicy p);

struct SimConfig {
  std::uint64_t seed = 0;
  std::int64_t replicates = 10'000;
  // Truncation level K is the smallest index with B_K <= trunc_tol * B_n, so the neglected
  // randomness is a fixed fraction of the fluctuation scale of T_n.
  double trunc_tol = 1e-2;
  std::optional<std::int64_t> max_index;  // default CDI_MAX_INDEX
  ResidualPolicy residual = ResidualPolicy::MeanSubstitute;
  unsigned threads = 1;  // 0 = hardware concurrency
};

struct EstimateCI {
  double point = 0.0;
  double std_error = 0.0;
  std::int64_t replicates = 0;
  std::uint64_t seed = 0;
};

using Rng = std::mt19937_64;

/// Independent stream for one replicate, derived from (seed, replicate) with splitmix64.
Rng replicate_stream(std::uint64_t seed, std::uint64_t replicate);

/// Uniform on (0, 1] with 53 random bits.
inline double uniform_open0(Rng& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

/// Exponential with the given mean, by inverse transform.
inline double exp_draw(Rng& rng, double mean) { return -std::log(uniform_open0(rng)) * mean; }

/// Holding-time means 1/lambda_i for i in (n, K] and the tail handling beyond K.
struct Truncation {
  std::int64_t n = 0;
  std::int64_t K = 0;
  double residual_mean = 0.0;  // A_K
  double residual_sd = 0.0;    // B_K
  std::vector<double> g;       // g[k] = 1/lambda_{n+1+k}
};

/// Smallest K >= max(n + 1, min_level) with B_K <= trunc_tol * B_n.
/// Throws TruncationError when no such K exists below the index cap.
Truncation make_truncation(const RateModel& model, std::int64_t n, const SimConfig& cfg,
                           std::int64_t min_level = 0);

/// Truncation for reading Z(t): K >= 2 v(t) and the holding-time means cover [2, K].
Truncation time_truncation(const RateModel& model, double t, const SimConfig& cfg);

/// Realized hitting times T_m for m in [n_low, n_high].
struct PathSample {
  std::int64_t n_low = 0;
  std::int64_t n_high = 0;
  std::vector<double> hitting_times;  // element k is T_{n_low + k}
  std::int64_t trunc_level = 0;
  ResidualPolicy residual_policy = ResidualPolicy::MeanSubstitute;

  double T(std::int64_t m) const;
  /// min{m in window : T_m <= t}; requires T_{n_high} <= t.
  std::int64_t Z(double t) const;
};

double sample_hitting_time(const Truncation& tr, ResidualPolicy policy, Rng& rng);
double sample_hitting_time(const RateModel& model, std::int64_t n, const SimConfig& cfg, Rng& rng);

/// One path over [n_low, n_high], sharing holding times across all states in the window.
PathSample sample_path(const RateModel& model, std::int64_t n_low, std::int64_t n_high, const SimConfig& cfg,
                       Rng& rng);

/// Z(t) by walking down from the truncation level; `tr` must come from make_truncation at v(t).
std::int64_t sample_Z(const Truncation& tr, ResidualPolicy policy, double t, Rng& rng);
std::int64_t sample_Z(const RateModel& model, double t, const SimConfig& cfg, Rng& rng);

/// Runs `body(replicate, rng)` for every replicate and returns the results in replicate order.
/// Output is independent of the thread count. T must not be bool (vector<bool> packs bits).
template <class T>
std::vector<T> run_replicates(const SimConfig& cfg, const std::function<T(std::int64_t, Rng&)>& body);

/// cfg.replicates draws of T_n.
std::vector<double> sample_hitting_times(const RateModel& model, std::int64_t n, const SimConfig& cfg);
/// cfg.replicates draws of Z(t).
std::vector<std::int64_t> sample_Z_many(const RateModel& model, double t, const SimConfig& cfg);

/// Mean and standard error with pairwise aggregation.
EstimateCI summarize(std::span<const double> values, std::uint64_t seed);
/// Unbiased sample variance.
double sample_variance(std::span<const double> values);

/// log E exp(u T_n) = -sum_{i>n} log(1 - u/lambda_i).
/// Throws TiltDomainError when u >= lambda_i for some i > n.
double log_mgf(const RateModel& model, std::int64_t n, double u);
double mgf(const RateModel& model, std::int64_t n, double u);

struct TiltedEstimate {
  EstimateCI estimate;
  std::int64_t n = 0;
  double x = 0.0;
  double theta = 0.0;
  double log_point = 0.0;  // log of estimate.point, finite even when the point underflows
  double relative_se = 0.0;
  double ess = 0.0;         // effective sample size among replicates that hit the event
  std::int64_t hits = 0;
  bool upper = true;        // P(T_n > x A_n) when true, P(T_n < x A_n) otherwise
  bool degenerate = false;  // every indicator took the same value
  std::int64_t trunc_level = 0;
};

/// P(T_n > x A_n) for x >= 1, P(T_n < x A_n) for x < 1, by exponential tilting.
///
/// Holding times in (n, K] are drawn at rates lambda_i - theta and weighted by the likelihood
/// ratio; the tail beyond K follows cfg.residual. theta = 0 is plain Monte Carlo with the same draws.
TiltedEstimate tilted_estimate(const RateModel& model, std::int64_t n, double x, double theta,
                               const SimConfig& cfg);

}  // namespace cdi

#include "cdi/detail/replicates_impl.hpp"
