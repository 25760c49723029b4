#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dipolium/coupling.hpp"

namespace dipolium {

// Time is measured in units of 1/Gamma0 and rates in units of Gamma0, where
// Gamma0 is the reference free-space rate (gamma0 of the first atom). The
// rotating-frame detuning of a field frequency w relative to atom A' is
// nu = (w - w~_A') / Gamma0.

/// Single Lorentzian field resonance. weight(a, b) is the on-resonance value
/// of Gamma_{ab}(w) in Gamma0 units; omega_m and half_width are in omega_T.
struct LorentzianResonance
{
  double omega_m = 0.0;
  double half_width = 0.0;
  Eigen::MatrixXd weight;
  double background = 0.0; // fitted offset of the fitted pair; kernels take
                           // flat parts through add_markov()
  double residual = 0.0;   // rms fit residual / max |Gamma|
};

struct KernelWindow
{
  double lo = 0.0; // omega_T
  double hi = 0.0;
};

struct KernelSampling
{
  int initial_points = 400;
  /// Intervals are bisected until linear interpolation at the midpoint is
  /// within this fraction of the largest spectral value.
  double refine_tolerance = 1e-4;
  int max_points = 200000;
};

/// Memory kernel of the amplitude equations,
///   k_{AA'}(tau) = -(1/2pi) int_window dnu S_{AA'}(nu) e^{-i nu tau},
/// with S_{AA'} = Gamma_{A*A'}(w) in Gamma0 units. Either sampled (piecewise
/// linear in w) or analytic (Lorentzian lines, extended to +-infinity), plus
/// an optional frequency-flat (Markov) part that acts instantaneously.
class MemoryKernel
{
public:
  using SpectrumFunction = std::function<Eigen::MatrixXcd(double omega)>;

  /// Samples `spectrum` (N x N, Gamma0 units) adaptively over `window`.
  static MemoryKernel sampled(const SpectrumFunction& spectrum,
                              std::vector<double> atom_frequencies,
                              double gamma0_ref, KernelWindow window,
                              const KernelSampling& sampling = {});

  static MemoryKernel lorentzian(std::vector<double> atom_frequencies,
                                 double gamma0_ref,
                                 std::vector<LorentzianResonance> lines);

  /// Adds a flat spectrum of the given rates (Gamma0 units).
  MemoryKernel& add_markov(const Eigen::MatrixXd& rates);

  int atoms() const noexcept { return static_cast<int>(frequencies_.size()); }
  double gamma0_ref() const noexcept { return gamma0_ref_; }
  const std::vector<double>& atom_frequencies() const noexcept { return frequencies_; }
  bool is_sampled() const noexcept { return !grid_.empty(); }
  const std::vector<double>& grid() const noexcept { return grid_; }
  KernelWindow window() const noexcept { return window_; }
  const Eigen::MatrixXd& markov() const noexcept { return markov_; }

  /// S_{AA'}(w) in Gamma0 units (sampled: linear interpolation, 0 outside).
  cdouble spectrum(int a, int ap, double omega) const;

  /// k_{AA'}(tau) for tau >= 0, excluding the Markov part.
  cdouble value(int a, int ap, double tau) const;

  /// (1/2pi) PV int S_{AA'}(nu)/nu dnu: the exchange/shift the memory term
  /// produces in the Markov limit. Zero for analytic lines, whose
  /// dispersive part is part of the model.
  double window_shift(int a, int ap) const;

  /// Integrals of k against the piecewise-linear basis of a uniform time grid.
  struct Weights
  {
    // Per pair (row-major a * N + ap):
    std::vector<cdouble> start;             // half hat at tau in [0, dt]
    std::vector<std::vector<cdouble>> full; // full hats centred at m dt, m = 1..n
    std::vector<std::vector<cdouble>> tail; // half hat on [(m-1)dt, m dt]
  };
  Weights weights(double dt, int n_steps) const;

  /// Two-atom symmetric-combination kernel with pair (0,0) = K_AA + sign K_AB.
  MemoryKernel superposition(int sign) const;

private:
  MemoryKernel() = default;
  std::size_t pair(int a, int ap) const
  {
    return static_cast<std::size_t>(a * atoms() + ap);
  }
  double detuning(int ap, double omega) const
  {
    return (omega - frequencies_[static_cast<std::size_t>(ap)]) / gamma0_ref_;
  }

  std::vector<double> frequencies_;
  double gamma0_ref_ = 1.0;
  KernelWindow window_{};
  std::vector<double> grid_;                  // omega_T, sampled kernels
  std::vector<std::vector<cdouble>> samples_; // per pair
  std::vector<LorentzianResonance> lines_;
  Eigen::MatrixXd markov_;
};

/// Kernel from the Green-tensor spectra of an atom set (total Im G).
MemoryKernel build_kernel(std::span<const Atom> atoms,
                          const GreenProvider& green, KernelWindow window,
                          const KernelSampling& sampling = {});

/// How the explicit dipole-dipole term is combined with the memory integral.
enum class ExchangeMode {
  /// Explicit delta_{AA'} minus the kernel's window shift, so that the
  /// Markov limit reproduces K_{A*A'} exactly.
  consistent,
  /// Explicit delta_{AA'} as is, diagonal zero.
  as_written,
};

/// Explicit coupling matrix X (Gamma0 units) entering
/// dC_A/dt = sum_A' i X_{AA'} e^{i(w~_A - w~_A')t} C_A' + memory term.
Eigen::MatrixXd explicit_exchange(const CouplingMatrix& couplings,
                                  const MemoryKernel& kernel,
                                  ExchangeMode mode);

struct AmplitudeTrajectory
{
  std::vector<double> t;      // 1/Gamma0
  Eigen::MatrixXcd amplitude; // rows: time, cols: atoms

  int atoms() const noexcept { return static_cast<int>(amplitude.cols()); }
  double probability(int step, int atom) const
  {
    return std::norm(amplitude(step, atom));
  }
  double total_probability(int step) const;
};

struct VolterraOptions
{
  double t_max = 1.0;
  double dt = 1e-3;
  double probability_slack = 1e-3;
};

/// Trapezoidal product-integration march of the coupled amplitude equations.
/// Throws ConvergenceError if the total occupation exceeds 1 + slack.
AmplitudeTrajectory solve_volterra(const MemoryKernel& kernel,
                                   const Eigen::MatrixXd& explicit_coupling,
                                   std::span<const cdouble> initial,
                                   const VolterraOptions& options);

struct SuperpositionView
{
  std::vector<double> t;
  std::vector<cdouble> c_plus;
  std::vector<cdouble> c_minus;
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  double omega_plus = 0.0;  // Rabi frequencies, 0 without a half width
  double omega_minus = 0.0;
};

/// C_+- = 2^{-1/2} (C_A +- C_B) e^{-+ i delta_AB t}. Requires
/// K_AA = K_BB and K_AB = K_BA within `tolerance` (relative); throws
/// DomainError naming the violated relation otherwise.
SuperpositionView to_superposition(const AmplitudeTrajectory& trajectory,
                                   const CouplingMatrix& couplings,
                                   double half_width = 0.0,
                                   double tolerance = 1e-8);

struct OccupationPair
{
  std::vector<double> p_a;
  std::vector<double> p_b;
};

/// Markov solution for two equivalent atoms,
/// P_A(B) = 1/2 [cosh(G_AB t) +- cos(2 d_AB t)] e^{-G_BB t}.
OccupationPair weak_coupling_closed_form(std::span<const double> t,
                                         double gamma_aa, double gamma_ab,
                                         double delta_ab);

double rabi_frequency(double gamma_strong, double half_width);

/// Exact-resonance solution with one superposition strongly coupled to a
/// Lorentzian line (branch = +1 for |+>, -1 for |->).
OccupationPair strong_coupling_closed_form(std::span<const double> t,
                                           double gamma_plus,
                                           double gamma_minus,
                                           double half_width, double delta_ab,
                                           int branch);

/// Least-squares Lorentzian (+ constant) fit of rate(w) on [window.lo,
/// window.hi]. Throws ConvergenceError when the window does not isolate a
/// single line (rms residual > 10% of the peak, or a second peak).
LorentzianResonance fit_lorentzian(std::span<const double> omega,
                                   std::span<const double> rate,
                                   KernelWindow window);
LorentzianResonance fit_lorentzian(const CouplingSpectrum& spectrum, int a,
                                   int b, KernelWindow window);

enum class Regime { weak, strong, crossover };
Regime classify_regime(double gamma_strong, double half_width);
std::string to_string(Regime regime);

} // namespace dipolium
