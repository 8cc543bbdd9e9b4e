#include "cdi/rate_models.hpp"

#include <cfloat>
#include <cmath>
#include <mutex>
#include <numbers>
#include <utility>

#include <fmt/format.h>

#include "cdi/errors.hpp"

namespace cdi {

std::string_view to_string(RateKind kind) {
  switch (kind) {
    case RateKind::Kingman: return "kingman";
    case RateKind::TripleMerge: return "triple-merge";
    case RateKind::RegVarying: return "regularly-varying";
    case RateKind::FromTailMeans: return "from-tail-means";
    case RateKind::Custom: return "custom";
  }
  return "unknown";
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::C1: return "c1";
    case Condition::Rxr: return "Rxr";
    case Condition::C2: return "c2";
    case Condition::A1: return "a1";
    case Condition::A11: return "a11";
    case Condition::BoA: return "BoA";
    case Condition::BoAn: return "BoAn";
    case Condition::Cond1: return "cond1";
    case Condition::Cond1e: return "cond1e";
    case Condition::Cond2: return "cond2";
    case Condition::Crv: return "crv";
  }
  return "unknown";
}

struct RateModel::Memo {
  std::mutex mutex;
  std::vector<double> inverse;  // inverse[k] = 1/lambda_{k+2}
};

RateModel::RateModel(RateKind kind, ModelInfo info)
    : kind_(kind), info_(std::move(info)), memo_(std::make_shared<Memo>()) {}

RateModel RateModel::kingman() {
  ModelInfo info{.name = "kingman", .params = {}, .asserted = {}, .alpha = {}, .beta = 2.0};
  return RateModel(RateKind::Kingman, std::move(info));
}

RateModel RateModel::triple_merge() {
  ModelInfo info{.name = "triple", .params = {}, .asserted = {}, .alpha = {}, .beta = 3.0};
  return RateModel(RateKind::TripleMerge, std::move(info));
}

RateModel RateModel::regularly_varying(double beta, RealRule slow) {
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw DomainError(fmt::format("regular variation index must exceed 1, got {}", beta));
  }
  ModelInfo info{.name = "regvarying", .params = {.a = {}, .rho = {}, .c = {}, .beta = beta}, .asserted = {},
                 .alpha = {}, .beta = beta};
  RateModel m(RateKind::RegVarying, std::move(info));
  m.beta_ = beta;
  m.slow_ = std::move(slow);
  return m;
}

RateModel RateModel::from_tail_means(RealRule tail, RealRule gap, std::string name) {
  if (!tail) throw InvalidModelError("tail-means model requires a tail rule");
  ModelInfo info{.name = std::move(name), .params = {}, .asserted = {}, .alpha = {}, .beta = {}};
  RateModel m(RateKind::FromTailMeans, std::move(info));
  m.tail_ = std::move(tail);
  m.gap_ = std::move(gap);
  return m;
}

RateModel RateModel::custom(RateRule rates, std::string name) {
  if (!rates) throw InvalidModelError("custom model requires a rate rule");
  ModelInfo info{.name = std::move(name), .params = {}, .asserted = {}, .alpha = {}, .beta = {}};
  RateModel m(RateKind::Custom, std::move(info));
  m.rates_ = std::move(rates);
  return m;
}

RateModel RateModel::with_info(ModelInfo info) const {
  RateModel copy = *this;
  copy.info_ = std::move(info);
  return copy;
}

bool RateModel::has_exact_tail() const noexcept {
  return kind_ == RateKind::Kingman || kind_ == RateKind::FromTailMeans;
}

double RateModel::exact_tail(std::int64_t n) const {
  if (n < 1) throw DomainError(fmt::format("tail mean requires n >= 1, got {}", n));
  switch (kind_) {
    case RateKind::Kingman: return 2.0 / static_cast<double>(n);
    case RateKind::FromTailMeans: {
      const double a = tail_(static_cast<double>(n));
      if (!(a >= 0.0) || !std::isfinite(a)) {
        throw InvalidModelError(fmt::format("tail rule returned {} at n = {}", a, n));
      }
      return a;
    }
    default: throw DomainError(fmt::format("model '{}' has no closed-form tail", info_.name));
  }
}

bool RateModel::has_continuous_form() const noexcept { return kind_ != RateKind::Custom; }

double RateModel::inverse_rate_at(double y) const {
  switch (kind_) {
    case RateKind::Kingman: return 2.0 / (y * (y - 1.0));
    case RateKind::TripleMerge: return 6.0 / (2.0 * y * (2.0 * y - 1.0) * (2.0 * y - 2.0));
    case RateKind::RegVarying: {
      const double l = slow_ ? slow_(y) : 1.0;
      if (!(l > 0.0) || !std::isfinite(l)) {
        throw InvalidModelError(fmt::format("slowly varying factor is {} at {}", l, y));
      }
      return std::pow(y, -beta_) / l;
    }
    case RateKind::FromTailMeans: {
      const double g = gap_ ? gap_(y) : tail_(y - 1.0) - tail_(y);
      if (!(g > 0.0)) {
        // Underflow: the rate is effectively infinite.
        if (g == 0.0 && (gap_ || tail_(y - 1.0) < DBL_MIN)) return 0.0;
        throw InvalidModelError(
            fmt::format("tail rule of '{}' is not strictly decreasing at {}", info_.name, y));
      }
      return g;
    }
    case RateKind::Custom: break;
  }
  throw DomainError(fmt::format("model '{}' has no continuous form", info_.name));
}

double RateModel::inverse_rate(std::int64_t n) const {
  if (n < 2) throw DomainError(fmt::format("death rates are defined for n >= 2, got {}", n));
  if (kind_ == RateKind::Custom) {
    const double rate = rates_(n);
    if (!(rate > 0.0) || std::isnan(rate)) {
      throw InvalidModelError(fmt::format("rate rule of '{}' returned {} at n = {}", info_.name, rate, n));
    }
    return 1.0 / rate;
  }
  if (kind_ == RateKind::Kingman) {
    const double x = static_cast<double>(n);
    return 2.0 / (x * (x - 1.0));
  }
  return inverse_rate_at(static_cast<double>(n));
}

double RateModel::lambda(std::int64_t n) const {
  const double x = static_cast<double>(n);
  if (kind_ == RateKind::Kingman && n >= 2) return x * (x - 1.0) / 2.0;
  if (kind_ == RateKind::TripleMerge && n >= 2) return 2.0 * x * (2.0 * x - 1.0) * (2.0 * x - 2.0) / 6.0;
  return 1.0 / inverse_rate(n);
}

double lambda(const RateModel& model, std::int64_t n) { return model.lambda(n); }

std::vector<double> RateModel::inverse_rates(std::int64_t lo, std::int64_t hi) const {
  if (lo < 2 || hi < lo) throw DomainError(fmt::format("invalid rate window [{}, {}]", lo, hi));
  std::lock_guard lock(memo_->mutex);
  auto& cache = memo_->inverse;
  const auto needed = static_cast<std::size_t>(hi - 1);
  if (cache.size() < needed) {
    const auto old = static_cast<std::int64_t>(cache.size());
    cache.resize(needed);
    for (std::int64_t k = old; k < static_cast<std::int64_t>(needed); ++k) {
      cache[static_cast<std::size_t>(k)] = inverse_rate(k + 2);
    }
  }
  return {cache.begin() + (lo - 2), cache.begin() + (hi - 1)};
}

namespace {

void require(bool ok, std::string_view what) {
  if (!ok) throw DomainError(std::string(what));
}

RateModel tail_preset(std::string name, RateModel::RealRule tail, RateModel::RealRule gap, ModelParams params,
                      std::map<Condition, bool> asserted, std::optional<double> alpha = {},
                      std::optional<double> beta = {}) {
  RateModel m = RateModel::from_tail_means(std::move(tail), std::move(gap), name);
  ModelInfo info{.name = std::move(name), .params = params, .asserted = std::move(asserted), .alpha = alpha,
                 .beta = beta};
  info.asserted[Condition::C1] = true;
  return m.with_info(std::move(info));
}

std::map<Condition, bool> regular_variation_assertions() {
  return {{Condition::C1, true},  {Condition::Crv, true},   {Condition::Rxr, true},
          {Condition::A11, false}, {Condition::BoA, true},  {Condition::BoAn, true},
          {Condition::A1, true},   {Condition::Cond1e, true}, {Condition::Cond2, true}};
}

}  // namespace

RateModel preset(std::string_view name, const ModelParams& params) {
  if (name == "kingman") {
    RateModel m = RateModel::kingman();
    ModelInfo info = m.info();
    info.asserted = regular_variation_assertions();
    return m.with_info(std::move(info));
  }
  if (name == "triple") {
    RateModel m = RateModel::triple_merge();
    ModelInfo info = m.info();
    info.asserted = regular_variation_assertions();
    return m.with_info(std::move(info));
  }
  if (name == "regvarying") {
    const double beta = params.beta.value_or(2.0);
    require(beta > 1.0, "regvarying requires beta > 1");
    RateModel m = RateModel::regularly_varying(beta);
    ModelInfo info = m.info();
    info.asserted = regular_variation_assertions();
    return m.with_info(std::move(info));
  }
  if (name == "logpow") {
    // A_n = (log(n+1))^{-a}; the unit shift keeps A_1 finite.
    const double a = params.a.value_or(1.0);
    require(a > 0.0 && std::isfinite(a), "logpow requires a > 0");
    auto tail = [a](double y) { return std::pow(std::log(y + 1.0), -a); };
    auto gap = [a](double y) {
      const double l2 = std::log(y + 1.0);
      const double dl = -std::log1p(1.0 / y);  // log(y) - log(y+1)
      return std::pow(l2, -a) * std::expm1(-a * std::log1p(dl / l2));
    };
    return tail_preset("logpow", tail, gap, {.a = a, .rho = {}, .c = {}, .beta = {}},
                       {{Condition::BoA, true},
                        {Condition::BoAn, true},
                        {Condition::Cond1, true},
                        {Condition::Cond2, true},
                        {Condition::A1, true},
                        {Condition::Rxr, false}});
  }
  if (name == "polytail") {
    const double c = params.c.value_or(1.0);
    const double beta = params.beta.value_or(2.0);
    require(c > 0.0 && std::isfinite(c), "polytail requires c > 0");
    require(beta > 1.0 && std::isfinite(beta), "polytail requires beta > 1");
    auto tail = [c, beta](double y) { return c * std::pow(y, 1.0 - beta); };
    auto gap = [c, beta](double y) {
      return c * std::pow(y, 1.0 - beta) * std::expm1((1.0 - beta) * std::log1p(-1.0 / y));
    };
    return tail_preset("polytail", tail, gap, {.a = {}, .rho = {}, .c = c, .beta = beta},
                       regular_variation_assertions(), {}, beta);
  }
  if (name == "stretched") {
    const double rho = params.rho.value_or(0.5);
    require(rho > 0.0 && rho < 1.0, "stretched requires rho in (0, 1)");
    auto tail = [rho](double y) { return std::exp(-std::pow(y, rho)); };
    auto gap = [rho](double y) {
      const double yr = std::pow(y, rho);
      const double step = -yr * std::expm1(rho * std::log1p(-1.0 / y));  // y^rho - (y-1)^rho
      return std::exp(-yr) * std::expm1(step);
    };
    std::map<Condition, bool> asserted{{Condition::A1, true}, {Condition::A11, true}};
    if (rho >= 0.5) {
      asserted[Condition::Cond1e] = true;
      asserted[Condition::Cond1] = false;
    }
    return tail_preset("stretched", tail, gap, {.a = {}, .rho = rho, .c = {}, .beta = {}}, std::move(asserted));
  }
  if (name == "loglog") {
    // A_n = exp(-m/log m) with m = n + 2; the shift keeps m/log m increasing from n = 1.
    auto expo = [](double m) { return m / std::log(m); };
    auto tail = [expo](double y) { return std::exp(-expo(y + 2.0)); };
    auto gap = [expo](double y) {
      const double m = y + 2.0;
      return std::exp(-expo(m)) * std::expm1(expo(m) - expo(m - 1.0));
    };
    return tail_preset("loglog", tail, gap, {},
                       {{Condition::A11, true}, {Condition::Cond1e, true}, {Condition::Cond1, false}});
  }
  if (name == "geometric") {
    auto tail = [](double y) { return std::exp(-y); };
    auto gap = [](double y) { return std::exp(-y) * std::expm1(1.0); };
    return tail_preset("geometric", tail, gap, {},
                       {{Condition::C2, true}, {Condition::A11, true}, {Condition::Cond2, false}},
                       1.0 / std::numbers::e);
  }
  throw DomainError(fmt::format("unknown preset '{}'", name));
}

std::vector<std::string> preset_names() {
  return {"kingman", "triple", "regvarying", "logpow", "polytail", "stretched", "loglog", "geometric"};
}

}  // namespace cdi
