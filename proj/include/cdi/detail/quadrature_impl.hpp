#pragma once

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cdi/errors.hpp"

namespace cdi {

namespace detail {
inline boost::math::quadrature::tanh_sinh<double>& unit_integrator() {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(18);
  return integrator;
}
}  // namespace detail

template <class F>
QuadResult integrate_unit(F&& f, double rel_tol, double abs_tol) {
  // Boost passes the signed distance to the nearest endpoint: -s on the left half, 1 - s on the right.
  auto wrapped = [&](double s, double xc) {
    const double c = xc > 0.0 ? xc : 1.0 - s;
    return f(s, c);
  };
  double error = 0.0;
  double l1 = 0.0;
  const double value = detail::unit_integrator().integrate(wrapped, 0.0, 1.0, rel_tol, &error, &l1);
  if (!std::isfinite(value)) {
    throw QuadratureError("quadrature produced a non-finite value", value, error);
  }
  if (error > 10.0 * rel_tol * l1 + abs_tol && error > 1e-15 * l1) {
    throw QuadratureError("quadrature did not converge", value, error);
  }
  return {value, error};
}

}  // namespace cdi
