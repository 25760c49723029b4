#include "dipolium/special.hpp"

#include <cmath>
#include <string>

#include "dipolium/error.hpp"

namespace dipolium {

namespace {

void check_argument(int n, cdouble x, const char* who)
{
  if (n < 0)
    throw DomainError(std::string(who) + ": negative order");
  if (x == 0.0)
    throw DomainError(std::string(who) + ": zero argument");
  if (std::abs(x.imag()) > 700.0)
    throw ConvergenceError(std::string(who) + ": |Im x| too large, result overflows",
                           std::abs(x.imag()));
}

int miller_start(int nmax, cdouble x)
{
  const double ax = std::abs(x);
  const double base = std::max<double>(nmax, ax);
  return static_cast<int>(base + 16.0 + 4.0 * std::cbrt(base)) + 1;
}

// r[n] = f_n / f_{n-1} for the minimal (regular) solution of the spherical
// Bessel recurrence, n = 1..nmax, from a continued fraction started far above.
std::vector<cdouble> regular_ratios(int nmax, cdouble x)
{
  std::vector<cdouble> r(static_cast<std::size_t>(nmax) + 1, 0.0);
  cdouble next = 0.0;
  for (int n = miller_start(nmax, x); n >= 1; --n) {
    const cdouble cur = 1.0 / (static_cast<double>(2 * n + 1) / x - next);
    if (n <= nmax)
      r[static_cast<std::size_t>(n)] = cur;
    next = cur;
  }
  return r;
}

// Appends value * exp(log_prev); the mantissa is renormalized only when it
// drifts far from unity, so most entries share the previous log scale.
void push_scaled(ScaledSequence& s, cdouble value, double log_prev)
{
  const double mag = std::abs(value);
  if (!(mag > 0.0) || !std::isfinite(mag))
    throw ConvergenceError("scaled recurrence lost all significance");
  if (mag > 1e-150 && mag < 1e150) {
    s.mantissa.push_back(value);
    s.log_scale.push_back(log_prev);
    return;
  }
  s.mantissa.push_back(value / mag);
  s.log_scale.push_back(log_prev + std::log(mag));
}

} // namespace

cdouble ScaledSequence::value(int n) const
{
  const auto i = static_cast<std::size_t>(n);
  return mantissa[i] * std::exp(log_scale[i]);
}

cdouble ScaledSequence::ratio_down(int n) const
{
  const auto i = static_cast<std::size_t>(n);
  const cdouble r = mantissa[i - 1] / mantissa[i];
  return log_scale[i - 1] == log_scale[i] ? r : r * std::exp(log_scale[i - 1] - log_scale[i]);
}

std::vector<cdouble> spherical_bessel_j_sequence(int nmax, cdouble x)
{
  check_argument(nmax, x, "spherical_bessel_j");
  const ScaledSequence psi = riccati_psi(nmax, x);
  std::vector<cdouble> out(static_cast<std::size_t>(nmax) + 1);
  for (int n = 0; n <= nmax; ++n)
    out[static_cast<std::size_t>(n)] = psi.value(n) / x;
  return out;
}

std::vector<cdouble> spherical_bessel_h_sequence(int nmax, cdouble x)
{
  check_argument(nmax, x, "spherical_bessel_h");
  std::vector<cdouble> h(static_cast<std::size_t>(nmax) + 1);
  const cdouble e = std::exp(I * x);
  h[0] = -I * e / x;
  if (nmax >= 1)
    h[1] = -e * (x + I) / (x * x);
  for (int n = 1; n < nmax; ++n) {
    const auto i = static_cast<std::size_t>(n);
    h[i + 1] = static_cast<double>(2 * n + 1) / x * h[i] - h[i - 1];
    if (!std::isfinite(std::abs(h[i + 1])))
      throw ConvergenceError("spherical_bessel_h: overflow at order " +
                                 std::to_string(n + 1),
                             static_cast<double>(n + 1));
  }
  return h;
}

cdouble spherical_bessel_j(int n, cdouble x)
{
  return spherical_bessel_j_sequence(n, x).back();
}

cdouble spherical_bessel_h(int n, cdouble x)
{
  return spherical_bessel_h_sequence(n, x).back();
}

ScaledSequence riccati_psi(int nmax, cdouble x)
{
  check_argument(nmax, x, "riccati_psi");
  const std::vector<cdouble> r = regular_ratios(nmax, x);
  const cdouble psi0 = std::sin(x);
  const cdouble psi1 = std::sin(x) / x - std::cos(x);

  ScaledSequence s;
  s.mantissa.reserve(static_cast<std::size_t>(nmax) + 1);
  s.log_scale.reserve(static_cast<std::size_t>(nmax) + 1);
  // Normalize on whichever closed form is better conditioned.
  if (nmax == 0 || std::abs(psi0) >= std::abs(psi1)) {
    push_scaled(s, psi0, 0.0);
  } else {
    push_scaled(s, psi1 / r[1], 0.0);
  }
  for (int n = 1; n <= nmax; ++n)
    push_scaled(s, s.mantissa.back() * r[static_cast<std::size_t>(n)],
                s.log_scale.back());
  return s;
}

ScaledSequence riccati_xi(int nmax, cdouble x)
{
  check_argument(nmax, x, "riccati_xi");
  ScaledSequence s;
  s.mantissa.reserve(static_cast<std::size_t>(nmax) + 1);
  s.log_scale.reserve(static_cast<std::size_t>(nmax) + 1);
  const cdouble e = std::exp(I * x);
  const cdouble xi0 = -I * e;
  const cdouble xi1 = -e * (x + I) / x;
  push_scaled(s, xi0, 0.0);
  if (nmax == 0)
    return s;
  cdouble q = xi1 / xi0; // xi_n / xi_{n-1}
  push_scaled(s, s.mantissa.back() * q, s.log_scale.back());
  for (int n = 1; n < nmax; ++n) {
    q = static_cast<double>(2 * n + 1) / x - 1.0 / q;
    push_scaled(s, s.mantissa.back() * q, s.log_scale.back());
  }
  return s;
}

std::vector<cdouble> riccati_log_derivative(int nmax, cdouble z)
{
  if (nmax < 0)
    throw DomainError("riccati_log_derivative: negative order");
  if (z == 0.0)
    throw DomainError("riccati_log_derivative: zero argument");
  std::vector<cdouble> d(static_cast<std::size_t>(nmax) + 1);
  cdouble cur = 0.0;
  for (int n = miller_start(nmax, z) + 16; n >= 1; --n) {
    if (n <= nmax)
      d[static_cast<std::size_t>(n)] = cur;
    const cdouble nz = static_cast<double>(n) / z;
    cur = nz - 1.0 / (cur + nz);
  }
  d[0] = cur;
  return d;
}

LegendreTable legendre_table(int nmax, double c)
{
  if (nmax < 0 || !(std::abs(c) <= 1.0 + 1e-12))
    throw DomainError("legendre_table: need nmax >= 0 and |c| <= 1");
  LegendreTable t;
  t.p.assign(static_cast<std::size_t>(nmax) + 2, 0.0);
  t.dp.assign(static_cast<std::size_t>(nmax) + 2, 0.0);
  t.p[0] = 1.0;
  t.p[1] = c;
  t.dp[1] = 1.0;
  for (int n = 1; n <= nmax; ++n) {
    const auto i = static_cast<std::size_t>(n);
    t.p[i + 1] = ((2.0 * n + 1.0) * c * t.p[i] - n * t.p[i - 1]) / (n + 1.0);
    t.dp[i + 1] = t.dp[i - 1] + (2.0 * n + 1.0) * t.p[i];
  }
  t.p.resize(static_cast<std::size_t>(nmax) + 1);
  t.dp.resize(static_cast<std::size_t>(nmax) + 1);
  return t;
}

} // namespace dipolium
