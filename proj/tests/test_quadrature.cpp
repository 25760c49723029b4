#include <doctest.h>

#include <vector>

#include "dipolium/error.hpp"
#include "dipolium/quadrature.hpp"

using namespace dipolium;

namespace {

std::vector<double> grid(double a, double b, int n)
{
  std::vector<double> x;
  for (int i = 0; i <= n; ++i)
    x.push_back(a + (b - a) * i / n);
  return x;
}

} // namespace

TEST_CASE("principal value of linear functions is exact")
{
  const auto x = grid(-1.0, 2.0, 37);
  const double x0 = 0.4321;
  std::vector<double> one(x.size(), 1.0);
  std::vector<double> lin(x.begin(), x.end());
  const double log_ratio = std::log((2.0 - x0) / (x0 + 1.0));
  CHECK(pv_integral_linear(x, one, x0) == doctest::Approx(log_ratio).epsilon(1e-13));
  CHECK(pv_integral_linear(x, lin, x0) == doctest::Approx(3.0 + x0 * log_ratio).epsilon(1e-13));
}

TEST_CASE("principal value with the pole on a node")
{
  const auto x = grid(0.0, 1.0, 10);
  std::vector<double> f;
  for (double v : x)
    f.push_back(2.0 * v - 0.3);
  const double x0 = 0.5;
  const double ref = 2.0 * 1.0 + (2.0 * x0 - 0.3) * std::log((1.0 - x0) / x0);
  CHECK(pv_integral_linear(x, f, x0) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("principal value needs the pole inside the grid")
{
  const auto x = grid(0.0, 1.0, 10);
  std::vector<double> f(x.size(), 1.0);
  CHECK_THROWS_AS(pv_integral_linear(x, f, 1.5), DomainError);
  CHECK_THROWS_AS(pv_integral_linear(x, f, 0.01), DomainError);
}

TEST_CASE("integral over an exterior pole")
{
  const auto x = grid(1.0, 3.0, 20);
  std::vector<cdouble> f(x.size(), cdouble(1.0, -2.0));
  const cdouble v = integral_over_pole(x, f, -1.0);
  CHECK(std::abs(v - cdouble(1.0, -2.0) * std::log(4.0 / 2.0)) < 1e-13);
  CHECK_THROWS_AS(integral_over_pole(x, f, 2.0), DomainError);
}

TEST_CASE("Filon rule is exact for piecewise-linear functions")
{
  const auto x = grid(-0.5, 1.5, 13);
  std::vector<cdouble> f;
  const cdouble al(0.3, 0.1);
  const cdouble be(-1.2, 0.4);
  for (double v : x)
    f.push_back(al + be * v);
  for (double t : {0.0, 1e-6, 0.7, 25.0, 4000.0}) {
    // int (al + be x) e^{-ixt} dx in closed form
    cdouble ref;
    if (t < 1.0) {
      // Taylor series of the exponential, term by term
      cdouble c = 1.0;
      for (int k = 0; k < 40; ++k) {
        const double m0 = (std::pow(1.5, k + 1) - std::pow(-0.5, k + 1)) / (k + 1);
        const double m1 = (std::pow(1.5, k + 2) - std::pow(-0.5, k + 2)) / (k + 2);
        ref += c * (al * m0 + be * m1);
        c *= cdouble(0.0, -t) / double(k + 1);
      }
    } else {
      const cdouble mi(0.0, -t);
      auto prim = [&](double s) {
        return std::exp(mi * s) * ((al + be * s) / mi - be / (mi * mi));
      };
      ref = prim(1.5) - prim(-0.5);
    }
    CHECK(std::abs(filon_linear(x, f, t) - ref) < 1e-11 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("hat moments against Simpson quadrature")
{
  for (cdouble a : {cdouble(0.0, 0.0), cdouble(1e-4, -2e-4), cdouble(0.3, 0.9), cdouble(-3.0, 40.0),
                    cdouble(0.0, -0.999), cdouble(0.0, 1.001)}) {
    const int n = 20000;
    cdouble fall = 0.0;
    cdouble rise = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double s = double(i) / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const cdouble e = std::exp(a * s);
      fall += w * (1.0 - s) * e;
      rise += w * s * e;
    }
    fall /= 3.0 * n;
    rise /= 3.0 * n;
    const HatMoments m = hat_moments(a);
    CHECK(std::abs(m.falling - fall) < 1e-10);
    CHECK(std::abs(m.rising - rise) < 1e-10);
  }
}
