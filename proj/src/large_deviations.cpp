#include "cdi/large_deviations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "cdi/errors.hpp"
#include "cdi/numerics.hpp"
#include "cdi/tail_analysis.hpp"

namespace cdi {

namespace {

// Below this h = 1 - (beta-1)u the leading-order logarithmic asymptotics are used; their
// relative error is O(h log h).
constexpr double kSingularH = 1e-13;

struct Cut {
  double s;
  double c;  // 1 - s, exact
};

// int_0^1 f(s, 1 - s) ds split at the given interior cuts.
template <class F>
QuadResult integrate_cuts(F&& f, std::vector<Cut> cuts, double tol) {
  cuts.insert(cuts.begin(), Cut{0.0, 1.0});
  cuts.push_back(Cut{1.0, 0.0});
  QuadResult total{0.0, 0.0};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const Cut a = cuts[k];
    const Cut b = cuts[k + 1];
    const double len = a.s > 0.5 ? a.c - b.c : b.s - a.s;
    if (!(len > 0.0)) continue;
    const QuadResult r = integrate_unit(
        [&](double sig, double csig) {
          const double s = a.s + len * sig;
          const double c = b.c + len * csig;
          return f(s, c) * len;
        },
        tol);
    total.value += r.value;
    total.error += r.error;
  }
  return total;
}

// Cuts that resolve the scale of 1 - (1 - h) s^beta.
std::vector<Cut> cuts_for(double beta, double h) {
  std::vector<Cut> cuts;
  if (h > 4.0) {
    const double s = std::pow(h, -1.0 / beta);
    cuts.push_back({s, 1.0 - s});
  } else if (h < 0.25 && h > 0.0) {
    const double r = std::sqrt(h);
    cuts.push_back({1.0 - r, r});
    cuts.push_back({1.0 - h, h});
  } else if (h == 0.0) {
    cuts.push_back({1.0 - 1e-3, 1e-3});
  }
  return cuts;
}

// s^beta and 1 - s^beta from (s, c = 1 - s).
void powers(double beta, double s, double c, double& sb, double& om) {
  sb = std::pow(s, beta);
  om = sb < 0.5 ? 1.0 - sb : -std::expm1(beta * std::log1p(-c));
}

double factorial(int k) { return k == 3 ? 2.0 : 1.0; }

// Lambda^(k) expressed through h = 1 - (beta-1)u > 0.
double deriv_h(const LdContext& ctx, double h, int k) {
  const double beta = ctx.beta();
  const double w = beta - 1.0;
  if (h < kSingularH) {
    switch (k) {
      case 1: return w * (-std::log(h) / beta + ctx.log_singularity_constant());
      case 2: return w * w / (beta * h);
      default: return w * w * w / (beta * h * h);
    }
  }
  // y = 1/s: int_0^1 s^(k beta - 2) / D^k ds with D = 1 - s^beta + h s^beta.
  const double p = k * beta - 2.0;
  const QuadResult q = integrate_cuts(
      [&](double s, double c) {
        double sb, om;
        powers(beta, s, c, sb, om);
        const double d = om + h * sb;
        return std::pow(s, p) / std::pow(d, k);
      },
      cuts_for(beta, h), ctx.quad_rel_tol());
  return factorial(k) * std::pow(w, k) * q.value;
}

// Same, parametrized by eta = -log h so that h may underflow.
double deriv_eta(const LdContext& ctx, double eta, int k) {
  const double beta = ctx.beta();
  const double w = beta - 1.0;
  if (eta > -std::log(kSingularH)) {
    switch (k) {
      case 1: return w * (eta / beta + ctx.log_singularity_constant());
      case 2: return w * w * std::exp(eta) / beta;
      default: return w * w * w * std::exp(2.0 * eta) / beta;
    }
  }
  return deriv_h(ctx, std::exp(-eta), k);
}

// d Lambda'(u(eta)) / d eta = Lambda'' h / (beta - 1).
double deriv1_slope_eta(const LdContext& ctx, double eta) {
  const double w = ctx.beta() - 1.0;
  if (eta > -std::log(kSingularH)) return w / ctx.beta();
  const double h = std::exp(-eta);
  return deriv_h(ctx, h, 2) * h / w;
}

double lambda_h(const LdContext& ctx, double h) {
  const double beta = ctx.beta();
  const QuadResult q = integrate_cuts(
      [&](double s, double c) {
        if (s < 1e-100) return (1.0 - h) * std::pow(s, beta - 2.0);
        double sb, om;
        powers(beta, s, c, sb, om);
        const double l = sb < 0.5 ? std::log1p(-(1.0 - h) * sb) : std::log(om + h * sb);
        return -l / (s * s);
      },
      cuts_for(beta, h), ctx.quad_rel_tol());
  return q.value;
}

struct TauSolution {
  double tau = 0.0;
  double eta = 0.0;  // -log(1 - (beta-1) tau)
  double h = 1.0;    // 1 - (beta-1) tau
};

void require_x(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(fmt::format("x must be positive and finite, got {}", x));
}

TauSolution solve_tau(const LdContext& ctx, double x) {
  require_x(x);
  const double beta = ctx.beta();
  const double w = beta - 1.0;
  TauSolution out;
  if (x == 1.0) return out;

  if (x > 1.0) {
    // Lambda' as an increasing function of eta in (0, inf).
    auto F = [&](double eta) { return deriv_eta(ctx, eta, 1) - x; };
    double lo = 0.0;
    double hi = std::max(1.0, beta * (x / w - ctx.log_singularity_constant()) + 1.0);
    while (F(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw DomainError(fmt::format("tau bracket failed for x = {}", x));
    }
    while (hi - lo > ctx.root_rel_tol() * hi) {
      const double mid = 0.5 * (lo + hi);
      const double f = F(mid);
      if (f == 0.0) {
        lo = hi = mid;
        break;
      }
      (f < 0.0 ? lo : hi) = mid;
    }
    double eta = 0.5 * (lo + hi);
    const double polished = eta - F(eta) / deriv1_slope_eta(ctx, eta);
    if (polished >= lo && polished <= hi && std::isfinite(polished)) eta = polished;
    out.eta = eta;
    out.h = std::exp(-eta);
    out.tau = -std::expm1(-eta) / w;
    return out;
  }

  // x < 1: tau < 0, h = 1 - w tau > 1.
  auto G = [&](double t) { return deriv_h(ctx, 1.0 - w * t, 1) - x; };
  double lo, hi;
  if (x < 1e-3) {
    const double seed = -b_of_beta(beta) * std::pow(x, -beta / w) + 1.0 / x;
    lo = 2.0 * seed;
    hi = 0.5 * seed;
    while (G(hi) < 0.0) hi *= 0.5;
  } else {
    lo = -1.0;
    hi = 0.0;
  }
  while (G(lo) > 0.0) {
    hi = lo;
    lo *= 2.0;
    if (lo < -1e300) throw DomainError(fmt::format("tau bracket failed for x = {}", x));
  }
  while (hi - lo > ctx.root_rel_tol() * std::fabs(lo)) {
    const double mid = 0.5 * (lo + hi);
    const double g = G(mid);
    if (g == 0.0) {
      lo = hi = mid;
      break;
    }
    (g < 0.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  const double polished = t - G(t) / deriv_h(ctx, 1.0 - w * t, 2);
  if (polished >= lo && polished <= hi && std::isfinite(polished)) t = polished;
  out.tau = t;
  out.h = 1.0 - w * t;
  out.eta = -std::log1p(-w * t);
  return out;
}

double rate_I_from(double w, double x, const TauSolution& s) {
  if (x == 1.0) return 0.0;
  if (x > 1.0) return s.eta + x * std::expm1(-s.eta);
  return -w * x * s.tau - std::log1p(-w * s.tau);
}

// (1/(b-a)) int_a^b h(x) dx for 1 <= a < b, where I'(x) = (1 - h(x))/(beta - 1).
double mean_h(const LdContext& ctx, double a, double b) {
  const double ea = solve_tau(ctx, a).eta;
  const double eb = solve_tau(ctx, b).eta;
  // dx = (d Lambda'/d eta) d eta
  const QuadResult q = integrate_unit(
      [&](double s, double) {
        const double eta = ea + (eb - ea) * s;
        return std::exp(-eta) * deriv1_slope_eta(ctx, eta);
      },
      1e-10);
  return q.value * (eb - ea) / (b - a);
}

}  // namespace

LdContext::LdContext(double beta, double quad_rel_tol, double root_rel_tol)
    : beta_(beta), quad_tol_(quad_rel_tol), root_tol_(root_rel_tol), k_(0.0) {
  if (!(beta > 1.0) || !std::isfinite(beta)) throw DomainError(fmt::format("beta must exceed 1, got {}", beta));
  if (!(quad_rel_tol > 0.0) || !(root_rel_tol > 0.0)) throw DomainError("tolerances must be positive");
  // K = int_1^2 [1/(y^b - 1) - 1/(b(y-1))] dy + int_2^inf dy/(y^b - 1) + log(b)/b
  const double b = beta;
  const double a1 = (b - 1.0) / 2.0;
  const double a2 = (b - 1.0) * (b - 2.0) / 6.0;
  const QuadResult near = integrate_unit(
      [&](double t, double) {
        if (t < 1e-5) return (-a1 + (a1 * a1 - a2) * t) / b;
        return 1.0 / std::expm1(b * std::log1p(t)) - 1.0 / (b * t);
      },
      1e-14);
  const double two_b = std::pow(2.0, b);
  const QuadResult far = integrate_unit(
      [&](double s, double) { return 2.0 * std::pow(s, b - 2.0) / (two_b - std::pow(s, b)); }, 1e-14);
  k_ = near.value + far.value + std::log(b) / b;
}

double lambda_fn(const LdContext& ctx, double u) {
  const double w = ctx.beta() - 1.0;
  if (!(u <= 1.0 / w) || !std::isfinite(u)) {
    throw DomainError(fmt::format("Lambda(u) requires u <= 1/(beta-1) = {}, got {}", 1.0 / w, u));
  }
  if (u == 0.0) return 0.0;
  return lambda_h(ctx, std::max(0.0, 1.0 - w * u));
}

double lambda_deriv(const LdContext& ctx, double u, int order) {
  if (order < 1 || order > 3) throw DomainError(fmt::format("derivative order must be 1, 2 or 3, got {}", order));
  const double w = ctx.beta() - 1.0;
  if (!(u < 1.0 / w) || !std::isfinite(u)) {
    throw DomainError(fmt::format("Lambda derivatives require u < 1/(beta-1) = {}, got {}", 1.0 / w, u));
  }
  return deriv_h(ctx, 1.0 - w * u, order);
}

double tau(const LdContext& ctx, double x) { return solve_tau(ctx, x).tau; }

double rate_I(const LdContext& ctx, double x) {
  return rate_I_from(ctx.beta() - 1.0, x, solve_tau(ctx, x));
}

double rate_J(const LdContext& ctx, double x) {
  require_x(x);
  return x * rate_I(ctx, std::pow(x, ctx.beta() - 1.0));
}

RateEval evaluate(const LdContext& ctx, double x) {
  const TauSolution s = solve_tau(ctx, x);
  RateEval r;
  r.x = x;
  r.tau = s.tau;
  r.eta = s.eta;
  r.I = rate_I_from(ctx.beta() - 1.0, x, s);
  r.J = rate_J(ctx, x);
  return r;
}

double rate_I_slope(const LdContext& ctx, double a, double b) {
  require_x(a);
  require_x(b);
  if (!(a < b)) throw DomainError("slope requires a < b");
  if (a >= 1.0) return (1.0 - mean_h(ctx, a, b)) / (ctx.beta() - 1.0);
  return (rate_I(ctx, b) - rate_I(ctx, a)) / (b - a);
}

double rate_I_second_difference(const LdContext& ctx, double a, double b, double c) {
  if (!(a < b && b < c)) throw DomainError("second difference requires a < b < c");
  if (a >= 1.0) return (mean_h(ctx, a, b) - mean_h(ctx, b, c)) / ((ctx.beta() - 1.0) * (c - a));
  return (rate_I_slope(ctx, b, c) - rate_I_slope(ctx, a, b)) / (c - a);
}

double c_of_beta(double beta) {
  if (!(beta > 1.0) || !std::isfinite(beta)) throw DomainError(fmt::format("beta must exceed 1, got {}", beta));
  const double pi = std::numbers::pi;
  return std::pow((1.0 - 1.0 / beta) * pi / std::sin(pi / beta), beta / (beta - 1.0));
}

double b_of_beta(double beta) { return c_of_beta(beta) / (beta - 1.0); }

double scaled_integral_quadrature(double beta) {
  if (!(beta > 1.0)) throw DomainError(fmt::format("beta must exceed 1, got {}", beta));
  const double w = beta - 1.0;
  const QuadResult inner =
      integrate_unit([&](double y, double) { return 1.0 / (std::pow(y, beta) / w + 1.0); }, 1e-15);
  // y = 1/s on (1, inf)
  const QuadResult outer = integrate_unit(
      [&](double s, double) { return std::pow(s, beta - 2.0) / (1.0 / w + std::pow(s, beta)); }, 1e-15);
  return inner.value + outer.value;
}

double scaled_integral_closed_form(double beta) {
  if (!(beta > 1.0)) throw DomainError(fmt::format("beta must exceed 1, got {}", beta));
  const double pi = std::numbers::pi;
  return std::pow(beta - 1.0, 1.0 / beta) * (pi / beta) / std::sin(pi / beta);
}

Expansions expansions(const LdContext& ctx, double x) {
  require_x(x);
  const double b = ctx.beta();
  const double w = b - 1.0;
  const double c = c_of_beta(b);
  Expansions e;
  e.I_large = x / w;
  e.J_large = std::pow(x, b) / w;
  e.I_small = c * std::pow(x, -1.0 / w) - b / w * std::log(1.0 / x) - std::log(c) - b;
  e.J_small = c - (b * std::log(1.0 / x) + std::log(c) + b) * x;
  return e;
}

std::string_view to_string(LdSide side) { return side == LdSide::HittingTime ? "T" : "Z"; }

LdReport verify_thm3(const LdContext& ctx, const RateModel& model, double x, const std::vector<std::int64_t>& ns,
                     const SimConfig& cfg, LdSide side) {
  require_x(x);
  if (ns.empty()) throw DomainError("verify_thm3 needs at least one n");
  LdReport rep;
  rep.side = side;
  rep.model = model.name();
  rep.beta = ctx.beta();
  rep.x = x;
  rep.seed = cfg.seed;
  rep.replicates = cfg.replicates;
  rep.target = side == LdSide::HittingTime ? rate_I(ctx, x) : rate_J(ctx, x);

  for (std::int64_t n : ns) {
    if (n < 1) throw DomainError(fmt::format("n must be >= 1, got {}", n));
    LdPoint p;
    p.n = n;
    if (side == LdSide::HittingTime) {
      p.index = n;
      p.x_eff = x;
    } else {
      // {Z(A_n) > m} = {T_m > A_n} with m = floor(n x).
      p.index = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * x));
      if (p.index < 1) throw DomainError(fmt::format("floor(n x) < 1 at n = {}", n));
      p.x_eff = tail_mean(model, n) / tail_mean(model, p.index);
    }
    const double a = tail_mean(model, p.index);
    p.theta = p.x_eff == 1.0 ? 0.0 : tau(ctx, p.x_eff) * static_cast<double>(p.index) / a;
    const TiltedEstimate est = tilted_estimate(model, p.index, p.x_eff, p.theta, cfg);
    p.log_estimate = est.log_point;
    p.relative_se = est.relative_se;
    p.hits = est.hits;
    p.degenerate = est.degenerate;
    const double prob = std::exp(est.log_point);
    p.naive_relative_se =
        std::sqrt((1.0 - prob) / static_cast<double>(cfg.replicates)) * std::exp(-0.5 * est.log_point);
    p.rate = -est.log_point / static_cast<double>(n);
    p.gap = rep.target > 0.0 ? std::fabs(p.rate - rep.target) / rep.target : std::fabs(p.rate);
    rep.points.push_back(p);
  }
  rep.gap_non_increasing = true;
  for (std::size_t k = 1; k < rep.points.size(); ++k) {
    if (rep.points[k].gap > rep.points[k - 1].gap) rep.gap_non_increasing = false;
  }
  rep.final_gap = rep.points.back().gap;
  return rep;
}

}  // namespace cdi
