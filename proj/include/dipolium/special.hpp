#pragma once

#include <vector>

#include "dipolium/types.hpp"

namespace dipolium {

// Spherical Bessel j_n and Hankel h_n^(1) of complex argument. Both throw
// DomainError for n < 0 or x == 0 and ConvergenceError (range) when the
// result or an intermediate overflows (|Im x| > ~700, or n >> |x| for h_n).
cdouble spherical_bessel_j(int n, cdouble x);
cdouble spherical_bessel_h(int n, cdouble x);

/// j_0..j_nmax by Miller's downward recurrence, normalized on j_0 or j_1.
std::vector<cdouble> spherical_bessel_j_sequence(int nmax, cdouble x);
/// h_0..h_nmax by upward recurrence.
std::vector<cdouble> spherical_bessel_h_sequence(int nmax, cdouble x);

/// Riccati-Bessel sequences carried as mantissa * exp(log_scale) so that
/// multipole orders far beyond the argument stay representable. Value of
/// order n is `mantissa[n] * exp(log_scale[n])`.
struct ScaledSequence
{
  std::vector<cdouble> mantissa;
  std::vector<double> log_scale;

  int size() const noexcept { return static_cast<int>(mantissa.size()); }
  cdouble value(int n) const;
  /// f_{n-1} / f_n, computed without leaving the scaled representation.
  cdouble ratio_down(int n) const;
};

/// psi_n(x) = x j_n(x), n = 0..nmax.
ScaledSequence riccati_psi(int nmax, cdouble x);
/// xi_n(x) = x h_n^(1)(x), n = 0..nmax.
ScaledSequence riccati_xi(int nmax, cdouble x);

/// Logarithmic derivative D_n(z) = psi_n'(z)/psi_n(z), n = 0..nmax, by
/// downward recurrence.
std::vector<cdouble> riccati_log_derivative(int nmax, cdouble z);

/// Legendre P_n(c) and P_n'(c) for n = 0..nmax, |c| <= 1.
struct LegendreTable
{
  std::vector<double> p;
  std::vector<double> dp;
};
LegendreTable legendre_table(int nmax, double c);

} // namespace dipolium
