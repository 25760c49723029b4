#include "dipolium/material.hpp"

#include <algorithm>
#include <cmath>

#include "dipolium/error.hpp"
#include "dipolium/quadrature.hpp"

namespace dipolium {

void DrudeLorentz::validate() const
{
  if (!(omega_T > 0.0) || !std::isfinite(omega_T))
    throw DomainError("omega_T must be positive");
  if (!(omega_P >= 0.0) || !std::isfinite(omega_P))
    throw DomainError("omega_P must be non-negative");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DomainError("gamma must be positive (gamma = 0 is not causal)");
}

cdouble permittivity(const DrudeLorentz& model, double omega)
{
  if (!(omega > 0.0))
    throw DomainError("permittivity: frequency must be positive");
  if (model.is_vacuum())
    return 1.0;
  const cdouble den(model.omega_T * model.omega_T - omega * omega,
                    -model.gamma * omega);
  return 1.0 + model.omega_P * model.omega_P / den;
}

FrequencyBand surface_mode_band(const DrudeLorentz& model)
{
  model.validate();
  if (model.is_vacuum())
    return {};
  // With u = wT^2 - w^2, Re eps < -1 is 2u^2 + (wP^2 - 2g^2) u + 2g^2 wT^2 < 0.
  const double wt2 = model.omega_T * model.omega_T;
  const double g2 = model.gamma * model.gamma;
  const double b = model.omega_P * model.omega_P - 2.0 * g2;
  const double c = 2.0 * g2 * wt2;
  const double disc = b * b - 8.0 * c;
  if (b <= 0.0 || disc <= 0.0)
    return {};
  const double u_far = (-b - std::sqrt(disc)) / 4.0;
  const double u_near = c / (2.0 * u_far);
  return {std::sqrt(wt2 - u_near), std::sqrt(wt2 - u_far)};
}

std::vector<double> kramers_kronig_grid(const DrudeLorentz& model, double w_min,
                                        double w_max)
{
  model.validate();
  if (!(w_min > 0.0) || !(w_max > w_min))
    throw DomainError("kramers_kronig_grid: need 0 < w_min < w_max");
  const double wt = model.omega_T;
  const double fine = model.gamma / 64.0;
  const double core = 2.0 * model.gamma;

  // Spacing grows geometrically away from the line, capped relative to w.
  auto spacing = [&](double w) {
    const double d = std::abs(w - wt);
    if (d < core)
      return fine;
    return std::min(fine + 0.02 * (d - core), 0.004 * w + fine);
  };

  std::vector<double> up;
  for (double w = wt; w < w_max; w += spacing(w))
    up.push_back(w);
  up.push_back(w_max);
  std::vector<double> down;
  for (double w = wt - spacing(wt); w > w_min; w -= spacing(w))
    down.push_back(w);
  down.push_back(w_min);

  std::vector<double> grid(down.rbegin(), down.rend());
  grid.insert(grid.end(), up.begin(), up.end());
  return grid;
}

double kramers_kronig_residual(const DrudeLorentz& model,
                               std::span<const double> grid)
{
  model.validate();
  if (grid.size() < 3)
    throw DomainError("kramers_kronig_residual: grid too short");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw DomainError("kramers_kronig_residual: grid must increase");
  if (grid.front() > 0.01 * model.omega_T * (1 + 1e-12) ||
      grid.back() < 100.0 * model.omega_T * (1 - 1e-12))
    throw DomainError(
        "kramers_kronig_residual: grid must span [0.01, 100] omega_T");

  const auto it = std::upper_bound(grid.begin(), grid.end(), model.omega_T);
  if (it == grid.begin() || it == grid.end())
    throw DomainError("kramers_kronig_residual: grid misses omega_T");
  const double local = *it - *(it - 1);
  if (local > model.gamma / 4.0)
    throw DomainError("kramers_kronig_residual: spacing " +
                      std::to_string(local) + " near omega_T exceeds gamma/4 = " +
                      std::to_string(model.gamma / 4.0));

  if (model.is_vacuum())
    return 0.0;

  std::vector<cdouble> im(grid.size());
  std::vector<double> re(grid.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cdouble e = permittivity(model, grid[i]);
    im[i] = e.imag();
    re[i] = e.real() - 1.0;
    scale = std::max(scale, std::abs(re[i]));
  }

  // Re eps(w) - 1 = (1/pi) [PV int Im eps(w')/(w' - w) + int Im eps(w')/(w' + w)]
  // over w' > 0, using that Im eps is odd.
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double w = grid[i];
    const cdouble pv = pv_integral_linear(grid, im, w);
    const cdouble mirror = integral_over_pole(grid, im, -w);
    const double rec = (pv.real() + mirror.real()) / pi;
    worst = std::max(worst, std::abs(rec - re[i]));
  }
  return worst / scale;
}

} // namespace dipolium
