#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdi/rate_models.hpp"
#include "cdi/simulation.hpp"

namespace cdi {

enum class FAlphaMethod { Hypoexponential, MonteCarlo };

/// F_alpha is the law of sum_{i>=0} alpha^i (1 - alpha) E_i with E_i iid unit exponentials.
/// Matching the Laplace transform factor by factor gives this representation; the series
/// is truncated after n_terms summands.
struct FAlphaSpec {
  double alpha = 0.0;
  std::optional<int> n_terms;  // default: smallest m with alpha^m < 1e-10, at most 60
  FAlphaMethod method = FAlphaMethod::Hypoexponential;
};

int default_n_terms(double alpha);

/// CDF of the truncated series by partial fractions over the distinct rates
/// r_i = 1/(alpha^i (1 - alpha)). Coefficients are kept as (log magnitude, sign).
class FAlpha {
 public:
  /// Throws IllConditionedError for alpha > 0.9 or more than 60 terms.
  explicit FAlpha(const FAlphaSpec& spec);

  double alpha() const noexcept { return alpha_; }
  int n_terms() const noexcept { return static_cast<int>(rate_.size()); }
  double cdf(double x) const;
  /// Scale of sum_i w_i E_i for summand i.
  double weight(int i) const { return 1.0 / rate_.at(static_cast<std::size_t>(i)); }

 private:
  double alpha_;
  std::vector<double> rate_;
  std::vector<double> log_coef_;
  std::vector<int> sign_;
};

/// One draw of the truncated series.
double sample_f_alpha(const FAlphaSpec& spec, Rng& rng);

/// Empirical F_alpha(x) at each x from cfg.replicates draws of the truncated series.
std::vector<EstimateCI> f_alpha_cdf_mc(const FAlphaSpec& spec, std::span<const double> xs, const SimConfig& cfg);

/// F_alpha(x) by spec.method. Monte Carlo uses 10^5 draws with seed 0.
double f_alpha_cdf(const FAlphaSpec& spec, double x);

double std_normal_cdf(double x);

/// sup_x |F_n(x) - F(x)| for a continuous reference F. `sample` need not be sorted.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

enum class GofReference { StdNormal, FAlpha, Custom };

std::string_view to_string(GofReference r);

/// Outcome of one goodness-of-fit check. `statistic` is a KS distance unless
/// `statistic_kind` says otherwise (lln: |mean Z/v - 1|; thm2iii: max abs deviation over k;
/// corollary: |variance/target - 1|).
struct GofReport {
  std::string test_id;
  std::string model;
  std::string index_name;  // "n" or "v"
  std::int64_t index = 0;
  std::string statistic_kind = "ks";
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::uint64_t seed = 0;
  std::int64_t sample_size = 0;
  GofReference reference = GofReference::Custom;
  std::vector<std::pair<std::string, double>> details;

  double detail(std::string_view key) const;
};

/// KS distance between T_n/A_n and F_alpha. alpha defaults to the model's (c2) limit,
/// else the ratio lambda_n/lambda_{n+1}.
GofReport verify_thm1_limit(const RateModel& model, std::int64_t n, const SimConfig& cfg,
                            std::optional<double> alpha = {}, double threshold = 0.03);

/// max_k |P(Z(A_n) <= n + k) - F_alpha(alpha^-k)| for k in [-k_max, k_max]. F_alpha values
/// are cross-checked between the partial-fraction and Monte Carlo evaluators.
GofReport verify_thm2iii(const RateModel& model, std::int64_t n, const SimConfig& cfg,
                         std::optional<double> alpha = {}, int k_max = 2, double threshold = 0.03);

/// KS distance between (T_n - A_n)/B_n and the standard normal.
GofReport verify_clt(const RateModel& model, std::int64_t n, const SimConfig& cfg, double threshold = 0.03);

/// Variance of (Z(t) - v)/sqrt(v) at t = A_v against 1/(2 beta - 1), plus the scaling ratio
/// (A_v - A_{v + sqrt v}) / B_{v + sqrt v} against sqrt(2 beta - 1).
GofReport verify_corollary(const RateModel& model, std::int64_t v, const SimConfig& cfg,
                           std::optional<double> beta = {}, double rel_threshold = 0.1);

/// |mean of Z(t)/v - 1| at t = A_v.
GofReport verify_lln(const RateModel& model, std::int64_t v, const SimConfig& cfg, double threshold = 0.02);

}  // namespace cdi
