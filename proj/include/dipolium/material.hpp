#pragma once

#include <span>
#include <vector>

#include "dipolium/types.hpp"

namespace dipolium {

/// Single-resonance Drude-Lorentz dielectric,
///   eps(w) = 1 + wP^2 / (wT^2 - w^2 - i gamma w).
/// Frequencies are in units of omega_T, so omega_T defaults to 1.
struct DrudeLorentz
{
  double omega_T = 1.0;
  double omega_P = 0.5;
  double gamma = 1e-6;

  /// Throws DomainError unless omega_T > 0, omega_P >= 0, gamma > 0.
  void validate() const;
  bool is_vacuum() const noexcept { return omega_P == 0.0; }
};

cdouble permittivity(const DrudeLorentz& model, double omega);

/// Open interval on which Re eps < -1.
struct FrequencyBand
{
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const noexcept { return !(hi > lo); }
  bool contains(double w) const noexcept { return w > lo && w < hi; }
};

/// Band hosting the surface-guided sphere resonances. Empty when omega_P is
/// too small for Re eps to reach -1.
FrequencyBand surface_mode_band(const DrudeLorentz& model);

/// Nonuniform grid on [w_min, w_max] that resolves the absorption line with
/// spacing gamma/64 near omega_T.
std::vector<double> kramers_kronig_grid(const DrudeLorentz& model,
                                        double w_min = 0.01,
                                        double w_max = 100.0);

/// Max deviation between Re eps - 1 and its reconstruction from Im eps by a
/// principal-value Hilbert transform over `grid`, relative to max |Re eps - 1|.
/// The grid must span [0.01, 100] omega_T and resolve the line (spacing
/// <= gamma/4 at omega_T); otherwise DomainError.
double kramers_kronig_residual(const DrudeLorentz& model,
                               std::span<const double> grid);

} // namespace dipolium
