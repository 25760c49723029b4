#pragma once

#include <span>

#include "dipolium/types.hpp"

namespace dipolium {

/// Principal value of int f(x)/(x - x0) dx over the grid, with f linear on
/// every grid interval. Exact for such f. x0 must lie inside the grid and
/// at least half a step away from both edges; otherwise DomainError.
/// Grids must be strictly increasing.
cdouble pv_integral_linear(std::span<const double> x,
                           std::span<const cdouble> f, double x0);
double pv_integral_linear(std::span<const double> x, std::span<const double> f,
                          double x0);

/// Ordinary integral of f(x)/(x - x0) for x0 outside [x_0, x_last], f
/// piecewise linear. Throws DomainError if x0 lies inside the grid.
cdouble integral_over_pole(std::span<const double> x,
                           std::span<const cdouble> f, double x0);

/// int_{x_0}^{x_last} f(x) exp(-i x t) dx with f linear on each interval
/// (Filon-type rule, exact for piecewise-linear f at any t).
cdouble filon_linear(std::span<const double> x, std::span<const cdouble> f,
                     double t);

/// Moments of the piecewise-linear (hat) basis against exp(a s) on one step,
/// with s measured in units of the step:
///   falling = int_0^1 (1 - s) e^{a s} ds
///   rising  = int_0^1 s e^{a s} ds
/// Series expansion is used for small |a|.
struct HatMoments
{
  cdouble falling;
  cdouble rising;
};
HatMoments hat_moments(cdouble a);

} // namespace dipolium
