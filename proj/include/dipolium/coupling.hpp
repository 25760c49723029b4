#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dipolium/greens.hpp"

namespace dipolium {

/// Two-level atom. `orientation` is the (possibly complex) direction of the
/// transition dipole; its magnitude is carried by gamma0, the free-space
/// decay rate at omega_shifted in units of omega_T (Gamma0 = w^3 d^2 /
/// 3 pi eps0 hbar c^3). The A* convention of the coupling formulas conjugates
/// the orientation of the left atom.
struct Atom
{
  Vec3 position = Vec3::Zero(); // lambda_T
  CVec3 orientation = CVec3(0, 0, 1);
  double omega_bare = 1.0;
  double omega_shifted = 1.0;
  double gamma0 = 1e-6;

  void validate() const;
  /// Orientation normalized to unit length.
  CVec3 unit_dipole() const;
};

/// K_{A*A'} = -Gamma_{A*A'}/2 + i delta_{A*A'} for all atom pairs at one
/// frequency. Entries are angular frequencies in units of omega_T;
/// gamma() and delta() return them in units of gamma0_ref.
class CouplingMatrix
{
public:
  CouplingMatrix() = default;
  CouplingMatrix(Eigen::MatrixXcd k, double frequency, double gamma0_ref);

  int size() const noexcept { return static_cast<int>(k_.rows()); }
  double frequency() const noexcept { return frequency_; }
  double gamma0_ref() const noexcept { return gamma0_ref_; }
  const Eigen::MatrixXcd& k() const noexcept { return k_; }

  /// K in units of gamma0_ref.
  cdouble k_scaled(int a, int b) const { return k_(a, b) / gamma0_ref_; }
  double gamma(int a, int b) const { return -2.0 * k_(a, b).real() / gamma0_ref_; }
  double delta(int a, int b) const { return k_(a, b).imag() / gamma0_ref_; }

private:
  Eigen::MatrixXcd k_;
  double frequency_ = 0.0;
  double gamma0_ref_ = 1.0;
};

/// Prefactor relating G to K for the pair (A, A') when G is evaluated at
/// frequency omega: K = i * coupling_scale * (e_A^* . G . e_A').
double coupling_scale(const Atom& a, const Atom& ap, double omega);

/// K_{A*A'} at omega_shifted of A'. For A == A' (same index) pass the same
/// object: the provider's coincidence value is used (Re part from the
/// reflection tensor only).
cdouble coupling_K(const Atom& a, const Atom& ap, const GreenProvider& green);
/// Same, with the tensor evaluated at an explicit frequency.
cdouble coupling_K_at(const Atom& a, const Atom& ap, double omega,
                      const GreenProvider& green);

/// Full matrix for an atom set. Atom i's own frequency is used for column i.
CouplingMatrix coupling_matrix(std::span<const Atom> atoms,
                               const GreenProvider& green);
/// Full matrix with every atom's shifted frequency set to omega (spectra).
CouplingMatrix coupling_matrix_at(std::span<const Atom> atoms, double omega,
                                  const GreenProvider& green);

/// Resonant dipole-dipole shift delta_{A*A'} (omega_T units) from Re G at
/// omega_shifted of A'. Requires distinct atoms.
double dipole_dipole_shift(const Atom& a, const Atom& ap,
                           const GreenProvider& green);

/// Which part of the Green tensor enters a spectral quantity.
enum class GreenPart { total, scattering };

/// Gamma_{A*A'}(w) = 2 * coupling_scale * e_A^* Im G(w) e_A' on a frequency
/// grid (omega_T units), with Im G the entrywise imaginary part.
std::vector<cdouble> pair_rate_spectrum(const Atom& a, const Atom& ap,
                                        bool same_atom,
                                        std::span<const double> grid,
                                        const GreenProvider& green,
                                        GreenPart part);

/// delta^-_{AA'} (sign = -1) or delta^+_{AA'} (sign = +1): principal value
/// of (1/2pi) int Gamma_{AA'}(w) / (w -+ w~_A') dw over `grid`, in omega_T
/// units. The grid must start at 0 or above and, for the - branch, contain
/// w~_A' at least half a step inside.
double pv_shift_pair(const Atom& a, const Atom& ap, bool same_atom, int sign,
                     const GreenProvider& green, std::span<const double> grid,
                     GreenPart part = GreenPart::scattering);

/// Same, from a precomputed Gamma spectrum on `grid`.
double pv_shift_from_spectrum(std::span<const double> grid,
                              std::span<const cdouble> rate, double pole,
                              int sign);

/// Shifted transition frequency w~ = w_A - delta_{A*A} with delta_{A*A} from
/// the reflection part of Re G; when include_counter_rotating is set the
/// -2 delta^+ term is added. `iterations` fixed-point passes re-evaluate the
/// shift at the updated frequency.
double shifted_frequency(const Atom& a, const GreenProvider& green,
                         std::span<const double> grid,
                         bool include_counter_rotating, int iterations = 1);

struct CouplingSpectrum
{
  std::vector<double> omega;
  std::vector<CouplingMatrix> matrices;
};

/// Coupling matrices over a strictly monotone frequency grid. Frequencies
/// are distributed over worker threads; results are in grid order.
CouplingSpectrum sweep_spectrum(std::span<const Atom> atoms,
                                std::span<const double> grid,
                                const GreenProvider& green,
                                unsigned threads = 0);

/// Runs f(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& f);

} // namespace dipolium
