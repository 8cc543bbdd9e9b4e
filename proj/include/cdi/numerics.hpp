#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace cdi {

/// Compensated (Neumaier) running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Pairwise summation in a fixed tree order; the result depends only on the input sequence.
double pairwise_sum(std::span<const double> values) noexcept;

/// Largest admissible state index. Reads CDI_MAX_INDEX when set, otherwise 10^8.
std::int64_t max_index_from_env();

/// Integral of f(s, c) over s in (0, 1), with c = 1 - s supplied exactly near s = 1.
/// Double-exponential quadrature; throws QuadratureError when the error estimate
/// exceeds rel_tol * L1 + abs_tol.
struct QuadResult {
  double value;
  double error;
};

template <class F>
QuadResult integrate_unit(F&& f, double rel_tol, double abs_tol = 0.0);

}  // namespace cdi

#include "cdi/detail/quadrature_impl.hpp"
