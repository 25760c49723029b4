#include "dipolium/quadrature.hpp"

#include <cmath>
#include <vector>

#include "dipolium/error.hpp"

namespace dipolium {

namespace {

void check_grid(std::span<const double> x, std::size_t nf, const char* who)
{
  if (x.size() < 2 || nf != x.size())
    throw DomainError(std::string(who) + ": grid and values must match, >= 2 points");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1]))
      throw DomainError(std::string(who) + ": grid must be strictly increasing");
}

// int f/(x - x0) over [x_i, x_i+1] with f linear and x0 outside the
// closed interval, written as slope * h + f(x0 extrapolated) * log ratio.
cdouble interval_term(double xa, double xb, cdouble fa, cdouble fb, double x0,
                      cdouble f_at_pole)
{
  const double h = xb - xa;
  const cdouble s = (fb - fa) / h;
  const cdouble g = fa + s * (x0 - xa) - f_at_pole;
  cdouble out = s * h;
  if (g != 0.0)
    out += g * std::log(std::abs((xb - x0) / (xa - x0)));
  return out;
}

} // namespace

cdouble pv_integral_linear(std::span<const double> x,
                           std::span<const cdouble> f, double x0)
{
  check_grid(x, f.size(), "pv_integral_linear");
  const std::size_t n = x.size();
  if (!(x0 > x[0] && x0 < x[n - 1]))
    throw DomainError("pv_integral_linear: pole outside the grid");
  std::size_t j = 0;
  while (x[j + 1] < x0)
    ++j;
  // x0 in [x_j, x_j+1]
  if (x0 - x[0] < 0.5 * (x[1] - x[0]) ||
      x[n - 1] - x0 < 0.5 * (x[n - 1] - x[n - 2]))
    throw DomainError("pv_integral_linear: pole within half a step of the grid edge");

  const double t = (x0 - x[j]) / (x[j + 1] - x[j]);
  const cdouble f0 = f[j] + t * (f[j + 1] - f[j]);

  // PV of f(x0)/(x - x0) plus the regular remainder (f - f(x0))/(x - x0).
  cdouble sum = f0 * std::log((x[n - 1] - x0) / (x0 - x[0]));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const bool touches = x0 >= x[i] && x0 <= x[i + 1];
    if (touches) {
      sum += f[i + 1] - f[i];
      continue;
    }
    sum += interval_term(x[i], x[i + 1], f[i], f[i + 1], x0, f0);
  }
  return sum;
}

double pv_integral_linear(std::span<const double> x, std::span<const double> f,
                          double x0)
{
  std::vector<cdouble> fc(f.begin(), f.end());
  return pv_integral_linear(x, fc, x0).real();
}

cdouble integral_over_pole(std::span<const double> x,
                           std::span<const cdouble> f, double x0)
{
  check_grid(x, f.size(), "integral_over_pole");
  if (x0 >= x.front() && x0 <= x.back())
    throw DomainError("integral_over_pole: pole inside the grid");
  cdouble sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    sum += interval_term(x[i], x[i + 1], f[i], f[i + 1], x0, 0.0);
  return sum;
}

HatMoments hat_moments(cdouble a)
{
  if (std::abs(a) < 1.0) {
    // falling = sum a^m/(m+2)!, rising = sum (m+1) a^m/(m+2)!
    cdouble falling = 0.0, rising = 0.0;
    cdouble term = 0.5; // a^m/(m+2)! at m = 0
    for (int m = 0; m < 40; ++m) {
      falling += term;
      rising += static_cast<double>(m + 1) * term;
      if (std::abs(term) < 1e-18)
        break;
      term *= a / static_cast<double>(m + 3);
    }
    return {falling, rising};
  }
  const cdouble e = std::exp(a);
  const cdouble a2 = a * a;
  return {(e - 1.0 - a) / a2, (e * (a - 1.0) + 1.0) / a2};
}

cdouble filon_linear(std::span<const double> x, std::span<const cdouble> f,
                     double t)
{
  check_grid(x, f.size(), "filon_linear");
  cdouble sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double h = x[i + 1] - x[i];
    const HatMoments m = hat_moments(cdouble(0.0, -h * t));
    sum += h * std::exp(cdouble(0.0, -x[i] * t)) *
           (f[i] * m.falling + f[i + 1] * m.rising);
  }
  return sum;
}

} // namespace dipolium
