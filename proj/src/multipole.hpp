#pragma once

// Internal: angular part of the vector-spherical-wave expansion of a dyad
// between two exterior points. Shared by the sphere Green tensor and the
// tests, which check the angular algebra against the closed-form vacuum dyad.

#include <vector>

#include "dipolium/types.hpp"

namespace dipolium::detail {

/// Radial data of one point for orders 0..n_max. For a spherical Bessel-type
/// function z_n at rho = k r: z = z_n(rho), z_rho = z_n(rho)/rho,
/// dz = (rho z_n(rho))'/rho. Any common per-order factor may be moved into
/// the coefficients.
struct RadialSet
{
  std::vector<cdouble> z;
  std::vector<cdouble> z_rho;
  std::vector<cdouble> dz;
};

/// Orthonormal frame with e_z along r and r' in the (e_x, e_z) half-plane
/// with non-negative x. Columns are the frame axes in global coordinates.
struct PairFrame
{
  Eigen::Matrix3d axes;
  double cos_theta = 1.0; // angle between r and r'
  double sin_theta = 0.0;
};
PairFrame pair_frame(const Vec3& r, const Vec3& rp);

struct MultipoleSum
{
  Tensor3 value;
  double tail = 0.0;
};

/// (ik/4pi) sum_n (2n+1)/(n(n+1)) [coef_n N(r) (x) N(r') + coef_m M(r) (x) M(r')]
/// in the pair frame, n = 1..n_max. `p1` belongs to r (on the frame z
/// axis), `p2` to r'.
MultipoleSum multipole_sum_frame(double k, const std::vector<cdouble>& coef_n,
                                 const std::vector<cdouble>& coef_m,
                                 const RadialSet& p1, const RadialSet& p2,
                                 const PairFrame& frame, int n_max);

/// Frame tensor to global coordinates.
Tensor3 to_global(const PairFrame& frame, const Tensor3& g);

} // namespace dipolium::detail
