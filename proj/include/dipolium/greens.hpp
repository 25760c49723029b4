#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dipolium/material.hpp"
#include "dipolium/types.hpp"

namespace dipolium {

/// Dyadic Green tensor of the Helmholtz operator with a -delta source,
///   [k^2 eps - curl curl] G(r, r', w) = -delta(r - r'),
/// in units of 1/lambda_T. With this normalization the free-space
/// coincidence limit is Im G = k/(6 pi) I.
using DyadicGreenValue = Tensor3;

/// Free-space dyad between distinct points. Throws DomainError for r == r'.
DyadicGreenValue free_space_green(const Vec3& r, const Vec3& rp, double omega);

/// Exact coincidence limit of Im G_V, returned as the diagonal tensor
/// (k/6pi) I (imaginary entries only; Re G_V diverges and is excluded).
DyadicGreenValue imag_green_coincidence_free(double omega);

/// Dielectric sphere centred at the origin, embedded in vacuum.
struct SphereGeometry
{
  double diameter = 20.0; // lambda_T
  DrudeLorentz material{};

  double radius() const noexcept { return 0.5 * diameter; }
  void validate() const;
};

/// Multipole truncation. n_max == 0 selects the automatic cutoff
///   max(ka + 4 (ka)^{1/3} + 10, order where (a^2 / r r')^n n^2 < tolerance).
struct SeriesControl
{
  int n_max = 0;
  double tolerance = 1e-10;
};

/// Exterior reflection coefficients of order n for TE (M) and TM (N)
/// spherical waves. Equal to minus the usual Mie b_n and a_n.
struct MieCoefficients
{
  cdouble b_m;
  cdouble b_n;
};
MieCoefficients mie_reflection_coefficients(int n, double omega,
                                            const SphereGeometry& geometry);

/// Mie data for one frequency, evaluated once and reused for any number of
/// exterior point pairs. Immutable after construction.
class SphereScatteringSeries
{
public:
  SphereScatteringSeries(const SphereGeometry& geometry, double omega,
                         int n_max);

  double omega() const noexcept { return omega_; }
  int n_max() const noexcept { return n_max_; }
  const SphereGeometry& geometry() const noexcept { return geometry_; }

  /// Reflection coefficients of order n, 1 <= n <= n_max.
  MieCoefficients coefficients(int n) const;

  struct Sum
  {
    DyadicGreenValue value;
    double tail = 0.0; // max |term| of the last ten orders relative to |sum|
  };
  /// Raw truncated series for G_R(r, r'), no convergence check.
  Sum sum(const Vec3& r, const Vec3& rp) const;

  /// Raw sums for every pair i <= j of a point set (row-major upper
  /// triangle), sharing the radial functions of points at equal radius.
  std::vector<Sum> sum_pairs(std::span<const Vec3> points) const;

  /// Scattering part G_R(r, r'). Throws ConvergenceError when the tail
  /// exceeds `tolerance`.
  DyadicGreenValue green(const Vec3& r, const Vec3& rp,
                         double tolerance = 1e-10) const;

private:

  SphereGeometry geometry_;
  double omega_;
  int n_max_;
  bool vacuum_;
  // Scaled reflection coefficients beta_n = B_n * xi_n(ka)^2 and the ratios
  // xi_{n-1}(ka) / xi_n(ka), index 0..n_max.
  std::vector<cdouble> beta_m_;
  std::vector<cdouble> beta_n_;
  std::vector<cdouble> raw_m_;
  std::vector<cdouble> raw_n_;
  std::vector<cdouble> xi_a_ratio_;
};

/// Automatic multipole cutoff for the pair (r, r'); see SeriesControl.
int auto_multipole_order(const SphereGeometry& geometry, double omega,
                         double r, double rp, double tolerance);

/// Scattering part of the sphere Green tensor for two exterior points.
/// Throws DomainError for interior points, ConvergenceError when the series
/// tail exceeds control.tolerance at n_max.
DyadicGreenValue sphere_scattering_green(const Vec3& r, const Vec3& rp,
                                         double omega,
                                         const SphereGeometry& geometry,
                                         const SeriesControl& control = {});

/// G(r_i, r_j) for every ordered pair of a point set at one frequency.
/// Diagonal entries are coincidence-regularized: imaginary part of the
/// vacuum dyad plus the full scattering part.
struct GreenBlock
{
  int size = 0;
  std::vector<DyadicGreenValue> entries; // row-major size x size

  const DyadicGreenValue& operator()(int i, int j) const
  {
    return entries[static_cast<std::size_t>(i * size + j)];
  }
  DyadicGreenValue& operator()(int i, int j)
  {
    return entries[static_cast<std::size_t>(i * size + j)];
  }
};

/// Source of Green-tensor values for the coupling layer.
class GreenProvider
{
public:
  virtual ~GreenProvider() = default;

  /// Full (vacuum + scattering) tensors with coincidence regularization.
  virtual GreenBlock evaluate(std::span<const Vec3> points,
                              double omega) const = 0;
  /// Same, restricted to the scattering (reflection) part.
  virtual GreenBlock evaluate_scattering(std::span<const Vec3> points,
                                         double omega) const = 0;
};

class FreeSpaceProvider final : public GreenProvider
{
public:
  GreenBlock evaluate(std::span<const Vec3> points,
                      double omega) const override;
  GreenBlock evaluate_scattering(std::span<const Vec3> points,
                                 double omega) const override;
};

class SphereProvider final : public GreenProvider
{
public:
  explicit SphereProvider(SphereGeometry geometry, SeriesControl control = {});

  GreenBlock evaluate(std::span<const Vec3> points,
                      double omega) const override;
  GreenBlock evaluate_scattering(std::span<const Vec3> points,
                                 double omega) const override;

  const SphereGeometry& geometry() const noexcept { return geometry_; }
  const SeriesControl& control() const noexcept { return control_; }

private:
  SphereGeometry geometry_;
  SeriesControl control_;
};

/// Point at distance delta_r above the sphere surface (radius a) in the
/// direction (theta, phi), angles in radians.
Vec3 point_above_surface(double radius, double delta_r, double theta,
                         double phi);

} // namespace dipolium
