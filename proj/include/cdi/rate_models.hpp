#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdi {

enum class RateKind { Kingman, TripleMerge, RegVarying, FromTailMeans, Custom };

std::string_view to_string(RateKind kind);

/// Named hypotheses on the death rates used by the limit theorems.
enum class Condition {
  C1,      // sum of 1/lambda_n finite
  Rxr,     // limsup A_{nx}/A_n < 1 for all x > 1
  C2,      // lambda_n/lambda_{n+1} -> alpha in [0, 1)
  A1,      // lambda_n/lambda_{n+1} -> 1
  A11,     // A_{nx} = o(A_n) for all x > 1
  BoA,     // 1/lambda_n = o(A_n)
  BoAn,    // B_n = o(A_n)
  Cond1,   // sum (lambda_{i+1} A_i)^-2 finite
  Cond1e,  // sum (lambda_{i+1} A_{i(1-eps)})^-2 finite for every eps
  Cond2,   // C_n = o(B_n)
  Crv,     // lambda_n = n^beta L(n), L slowly varying
};

std::string_view to_string(Condition c);

struct ModelParams {
  std::optional<double> a;
  std::optional<double> rho;
  std::optional<double> c;
  std::optional<double> beta;
};

/// What is known about a model: its label, the conditions asserted for it, and
/// the limits those conditions carry.
struct ModelInfo {
  std::string name;
  ModelParams params;
  std::map<Condition, bool> asserted;
  std::optional<double> alpha;  // limit in (c2)
  std::optional<double> beta;   // index of regular variation
};

/// A sequence of death rates lambda_n, n >= 2.
///
/// Values are immutable after construction and may be shared between threads.
/// The primary quantity is the inverse rate 1/lambda_n, which stays finite for
/// rapidly growing sequences where lambda_n itself overflows.
class RateModel {
 public:
  using RealRule = std::function<double(double)>;
  using RateRule = std::function<double(std::int64_t)>;

  /// lambda_n = n(n-1)/2.
  static RateModel kingman();
  /// lambda_n = C(2n, 3).
  static RateModel triple_merge();
  /// lambda_n = n^beta L(n). `slow` defaults to L = 1 and is only checked for positivity.
  static RateModel regularly_varying(double beta, RealRule slow = {});
  /// lambda_n = 1/(A_{n-1} - A_n). `gap`, when given, must return A_{y-1} - A_y
  /// evaluated without cancellation; `tail` must accept real arguments >= 1.
  static RateModel from_tail_means(RealRule tail, RealRule gap = {}, std::string name = "tail-means");
  /// Integer-indexed rule returning lambda_n directly.
  static RateModel custom(RateRule rates, std::string name = "custom");

  RateKind kind() const noexcept { return kind_; }
  const ModelInfo& info() const noexcept { return info_; }
  const std::string& name() const noexcept { return info_.name; }

  double lambda(std::int64_t n) const;
  double inverse_rate(std::int64_t n) const;

  /// True when A_n is available in closed form.
  bool has_exact_tail() const noexcept;
  /// A_n for n >= 1; requires has_exact_tail().
  double exact_tail(std::int64_t n) const;

  /// True when 1/lambda extends to a smooth function of a real argument.
  bool has_continuous_form() const noexcept;
  double inverse_rate_at(double y) const;

  /// Memoized inverse rates for n in [lo, hi]; element k is 1/lambda_{lo+k}.
  std::vector<double> inverse_rates(std::int64_t lo, std::int64_t hi) const;

  /// Copy with replaced metadata.
  RateModel with_info(ModelInfo info) const;

 private:
  struct Memo;

  RateModel(RateKind kind, ModelInfo info);

  RateKind kind_;
  ModelInfo info_;
  double beta_ = 0.0;
  RealRule slow_;
  RealRule tail_;
  RealRule gap_;
  RateRule rates_;
  std::shared_ptr<Memo> memo_;
};

/// lambda_n of `model`; n < 2 is a DomainError.
double lambda(const RateModel& model, std::int64_t n);

/// Preset catalog. Names: kingman, triple, regvarying(beta), logpow(a), polytail(c, beta),
/// stretched(rho), loglog, geometric. Missing parameters take defaults a = 1, c = 1,
/// beta = 2, rho = 1/2.
RateModel preset(std::string_view name, const ModelParams& params = {});

std::vector<std::string> preset_names();

}  // namespace cdi
