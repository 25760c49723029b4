#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace dipolium {

using cdouble = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Tensor3 = Eigen::Matrix3cd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cdouble I{0.0, 1.0};

// Unit system used throughout the library: angular frequencies in units of
// the transverse resonance omega_T, lengths in units of lambda_T = 2 pi c /
// omega_T. The vacuum wave number of a frequency omega is therefore
// k = 2 pi omega (per lambda_T).
inline constexpr double wave_number(double omega) { return 2.0 * pi * omega; }

} // namespace dipolium
