#include <doctest.h>

#include "dipolium/error.hpp"
#include "dipolium/material.hpp"
#include "oracles.hpp"

using namespace dipolium;

TEST_CASE("permittivity matches the single-resonance formula")
{
  const DrudeLorentz m{1.0, 0.5, 1e-6};
  for (double w : {0.2, 0.999, 1.0, 1.0504862, 3.0}) {
    const cdouble e = permittivity(m, w);
    const oracle::cd ref = oracle::drude_lorentz(0.5, 1e-6, w);
    CHECK(std::abs(e - ref) <= 1e-12 * std::abs(ref));
  }
  CHECK(permittivity(m, 1e-9).real() == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(permittivity(m, 1.0).imag() > 0.0);
}

TEST_CASE("vacuum permittivity is exactly one")
{
  const DrudeLorentz m{1.0, 0.0, 1e-6};
  CHECK(m.is_vacuum());
  CHECK(permittivity(m, 1.05) == cdouble(1.0, 0.0));
}

TEST_CASE("material parameters are validated")
{
  CHECK_THROWS_AS((DrudeLorentz{1.0, -0.1, 1e-6}.validate()), DomainError);
  CHECK_THROWS_AS((DrudeLorentz{1.0, 0.5, 0.0}.validate()), DomainError);
  CHECK_THROWS_AS((DrudeLorentz{0.0, 0.5, 1e-6}.validate()), DomainError);
  CHECK_THROWS_AS(permittivity(DrudeLorentz{}, 0.0), DomainError);
}

TEST_CASE("surface-mode band edges are the Re eps = -1 crossings")
{
  const DrudeLorentz m{1.0, 0.5, 1e-6};
  const FrequencyBand band = surface_mode_band(m);
  REQUIRE_FALSE(band.empty());
  CHECK(band.lo == doctest::Approx(oracle::re_eps_crossing(0.5, 1e-6, 1.0, 1.02)).epsilon(1e-12));
  CHECK(band.hi == doctest::Approx(oracle::re_eps_crossing(0.5, 1e-6, 1.02, 1.2)).epsilon(1e-12));
  CHECK(band.contains(1.05048621));
  // wT^2 + wP^2/2 is the upper edge for vanishing damping
  CHECK(band.hi == doctest::Approx(std::sqrt(1.125)).epsilon(1e-9));
}

TEST_CASE("no band when damping is too strong")
{
  CHECK(surface_mode_band(DrudeLorentz{1.0, 0.5, 0.5}).empty());
  CHECK(surface_mode_band(DrudeLorentz{1.0, 0.0, 1e-6}).empty());
}

TEST_CASE("Kramers-Kronig reconstruction of Re eps")
{
  for (double g : {1e-6, 1e-3, 0.05}) {
    const DrudeLorentz m{1.0, 0.5, g};
    const auto grid = kramers_kronig_grid(m);
    CHECK(kramers_kronig_residual(m, grid) < 1e-3);
  }
}

TEST_CASE("Kramers-Kronig refuses a grid that misses the line")
{
  const DrudeLorentz m{1.0, 0.5, 1e-6};
  std::vector<double> coarse;
  for (int i = 0; i <= 1000; ++i)
    coarse.push_back(0.01 + (100.0 - 0.01) * i / 1000.0);
  CHECK_THROWS_AS(kramers_kronig_residual(m, coarse), DomainError);
}
