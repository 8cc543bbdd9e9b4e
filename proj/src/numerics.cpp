#include "cdi/numerics.hpp"

#include <cstdlib>
#include <string>

#include "cdi/errors.hpp"

namespace cdi {

namespace {
double pairwise_block(std::span<const double> v) noexcept {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_block(v.first(half)) + pairwise_block(v.subspan(half));
}
}  // namespace

double pairwise_sum(std::span<const double> values) noexcept { return pairwise_block(values); }

std::int64_t max_index_from_env() {
  constexpr std::int64_t kDefault = 100'000'000;
  const char* raw = std::getenv("CDI_MAX_INDEX");
  if (raw == nullptr || *raw == '\0') return kDefault;
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 16) {
    throw DomainError(std::string("CDI_MAX_INDEX must be an integer >= 16, got '") + raw + "'");
  }
  return v;
}

}  // namespace cdi
