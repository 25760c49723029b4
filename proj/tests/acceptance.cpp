// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "dipolium/dynamics.hpp"
#include "dipolium/error.hpp"
#include "dipolium/scenario.hpp"

using namespace dipolium;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b)
{
  return std::abs(a - b) / std::abs(b);
}

std::size_t column(const RunArtifact& a, const std::string& name)
{
  const auto it = std::find(a.columns.begin(), a.columns.end(), name);
  if (it == a.columns.end())
    throw std::runtime_error("missing column " + name);
  return static_cast<std::size_t>(it - a.columns.begin());
}

std::vector<double> column_values(const RunArtifact& a, const std::string& name)
{
  const std::size_t c = column(a, name);
  std::vector<double> v;
  for (const auto& row : a.rows)
    v.push_back(row[c]);
  return v;
}

double metadata_value(const RunArtifact& a, const std::string& key)
{
  for (const std::string& m : a.metadata)
    if (m.rfind(key + ": ", 0) == 0)
      return std::stod(m.substr(key.size() + 2));
  throw std::runtime_error("missing metadata " + key);
}

SphereProvider provider_for(const ScenarioConfig& c)
{
  return SphereProvider(c.geometry(), SeriesControl{c.run.n_max, c.run.series_tolerance});
}

// Largest total occupation seen in any solver run of this suite.
double peak_probability = 0.0;

void track(const AmplitudeTrajectory& tr)
{
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    peak_probability = std::max(peak_probability, tr.total_probability(static_cast<int>(i)));
}

// ---------------------------------------------------------------------------
// Surface-mode table: frequency of the |B_N| peak for each multipole order.

struct Mode
{
  int n;
  double omega;
};

std::vector<Mode> mode_table(const SphereGeometry& g, int n_max)
{
  const FrequencyBand band = surface_mode_band(g.material);
  const double lo = band.lo + 0.01 * (band.hi - band.lo);
  const double hi = band.hi - 1e-9;
  std::vector<Mode> modes(static_cast<std::size_t>(n_max));
  parallel_for(modes.size(), 0, [&](std::size_t i) {
    const int n = static_cast<int>(i) + 1;
    // 1/|B_N| is smooth with a sharp V at the pole
    auto f = [&](double w) { return 1.0 / std::abs(mie_reflection_coefficients(n, w, g).b_n); };
    constexpr int coarse = 600;
    double bw = lo, bv = 1e300;
    for (int k = 0; k <= coarse; ++k) {
      const double w = lo + (hi - lo) * k / coarse;
      const double v = f(w);
      if (v < bv) {
        bv = v;
        bw = w;
      }
    }
    double a = std::max(lo, bw - (hi - lo) / coarse);
    double b = std::min(hi, bw + (hi - lo) / coarse);
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = f(d);
      }
    }
    modes[i] = {n, 0.5 * (a + b)};
  });
  return modes;
}

const std::vector<Mode>& default_modes()
{
  static const std::vector<Mode> modes = mode_table(load_preset("fig1a").geometry(), 300);
  return modes;
}

constexpr double fig1_omega = 1.05048621;

const Mode& nearest_mode(double w)
{
  const auto& m = default_modes();
  return *std::min_element(m.begin(), m.end(), [&](const Mode& a, const Mode& b) {
    return std::abs(a.omega - w) < std::abs(b.omega - w);
  });
}

// ---------------------------------------------------------------------------
// Spectral peaks of a uniformly sampled signal.

struct Peak
{
  double omega;
  double height;
};

// Local maxima of |DFT| above omega_floor, largest first. Angular frequency.
std::vector<Peak> dft_peaks(const std::vector<double>& y, double dt, double omega_floor,
                            double& bin)
{
  const std::size_t n = y.size();
  double mean = 0.0;
  for (double v : y)
    mean += v;
  mean /= double(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = y[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  bin = 2.0 * pi / (double(n) * dt);
  std::vector<Peak> peaks;
  for (std::size_t k = 1; k + 1 < n / 2; ++k) {
    const double m = std::abs(spec[k]);
    if (k * bin > omega_floor && m > std::abs(spec[k - 1]) && m >= std::abs(spec[k + 1]))
      peaks.push_back({double(k) * bin, m});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.height > b.height; });
  return peaks;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome free_space_anchor()
{
  const FreeSpaceProvider vac;
  double worst = 0.0;
  double worst_g = 0.0;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double w : {0.5, 1.0, 1.05048621, 2.0}) {
    Atom a;
    a.position = Vec3(u(rng), u(rng), u(rng));
    a.orientation = CVec3(u(rng), u(rng), u(rng));
    a.omega_bare = a.omega_shifted = w;
    const CouplingMatrix m = coupling_matrix(std::span<const Atom>(&a, 1), vac);
    worst = std::max(worst, std::abs(m.gamma(0, 0) - 1.0));
    const Tensor3 g = imag_green_coincidence_free(w);
    const double ref = wave_number(w) / (6.0 * pi);
    for (int i = 0; i < 3; ++i)
      worst_g = std::max(worst_g, std::abs(g(i, i).imag() - ref) / ref);
  }
  return {worst < 1e-8 && worst_g < 1e-8,
          fmt("max |Gamma_AA/Gamma0 - 1| = %.2e, Im G coincidence rel err %.2e", worst, worst_g)};
}

Outcome resonance_location()
{
  const Mode& m = nearest_mode(fig1_omega);
  // Gamma_AA of the fig1a atoms on that line
  ScenarioConfig c = load_preset("fig1a");
  const auto atoms = c.build_atoms();
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i)
    grid.push_back(m.omega - 2e-5 + 1e-7 * i);
  const SphereProvider sp = provider_for(c);
  const CouplingSpectrum s = sweep_spectrum(atoms, grid, sp);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (s.matrices[i].gamma(0, 0) > s.matrices[best].gamma(0, 0))
      best = i;
  double peak = grid[best];
  if (best > 0 && best + 1 < grid.size()) {
    const double y0 = s.matrices[best - 1].gamma(0, 0);
    const double y1 = s.matrices[best].gamma(0, 0);
    const double y2 = s.matrices[best + 1].gamma(0, 0);
    peak += 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2) * 1e-7;
  }
  const double d1 = std::abs(m.omega - fig1_omega);
  const double d2 = std::abs(peak - fig1_omega);
  const auto& all = default_modes();
  const double spacing = std::abs(all[static_cast<std::size_t>(m.n)].omega - m.omega);
  return {d1 < 1e-4 && d2 < 1e-4,
          fmt("|B_N| peak of order n = %d at %.9f (off by %.2e), Gamma_AA peak at %.9f "
              "(off by %.2e), neighbouring mode spacing %.2e",
              m.n, m.omega, d1, peak, d2, spacing)};
}

Outcome figure3_numbers()
{
  const ScenarioConfig c1 = load_preset("fig3-curves1");
  const ScenarioConfig c2 = load_preset("fig3-curves2");
  const auto a1 = c1.build_atoms();
  const auto a2 = c2.build_atoms();
  const CouplingMatrix m1 = coupling_matrix(a1, provider_for(c1));
  const CouplingMatrix m2 = coupling_matrix(a2, provider_for(c2));
  const double gaa1 = m1.gamma(0, 0), gab1 = m1.gamma(0, 1), dab1 = m1.delta(0, 1);
  const double gaa2 = m2.gamma(0, 0), dab2 = m2.delta(0, 1);
  const bool ok = rel(gaa1, 640.848) < 0.02 && rel(gab1, 640.319) < 0.02 &&
                  rel(dab1, 1112.0) < 0.02 && rel(gaa2, 8372.0) < 0.02 && std::abs(dab2) < 5.0;
  return {ok, fmt("curves1: Gamma_AA %.3f, Gamma_AB %.3f, delta_AB %.1f; curves2: Gamma_AA "
                  "%.1f, delta_AB %.3f",
                  gaa1, gab1, dab1, gaa2, dab2)};
}

Outcome rabi_frequency_check()
{
  const double w = rabi_frequency(16743.5, 0.5);
  return {std::abs(w - 129.4) < 0.05 && rel(w, 128.0) < 0.02,
          fmt("Omega_+ = %.3f Gamma0, %.2f%% from 128", w, 100.0 * rel(w, 128.0))};
}

Outcome weak_equivalence()
{
  std::string detail;
  bool ok = true;
  for (const char* name : {"fig3-curves1", "fig3-curves2"}) {
    const ScenarioConfig c = load_preset(name);
    const RunArtifact a = run_scenario(c);
    const auto t = column_values(a, "t");
    const auto pa = column_values(a, "P_A");
    const auto pb = column_values(a, "P_B");
    const double gaa = metadata_value(a, "geometry Gamma_AA");
    const double gab = metadata_value(a, "geometry Gamma_AB");
    const double dab = metadata_value(a, "geometry delta_AB");
    peak_probability = std::max(peak_probability, metadata_value(a, "max total probability"));
    const OccupationPair ref = weak_coupling_closed_form(t, gaa, gab, dab);
    double dev = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      dev = std::max({dev, std::abs(pa[i] - ref.p_a[i]), std::abs(pb[i] - ref.p_b[i])});
    const double lifetimes = t.back() * gaa;
    ok = ok && dev < 0.02 && lifetimes >= 5.0 - 1e-9;
    detail += fmt("%s sup|dP| = %.2e over %.2f lifetimes; ", name, dev, lifetimes);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// Two atoms on one Lorentzian line at exact resonance, strong branch `sign`.
AmplitudeTrajectory strong_run(int sign, double strong, double weak, double hw, double t_max,
                               double dt)
{
  const double w0 = 1.0504867;
  const double g0 = 1e-6;
  LorentzianResonance line;
  line.omega_m = w0;
  line.half_width = hw * g0;
  line.weight = Eigen::MatrixXd(2, 2);
  line.weight << strong / 2, sign * strong / 2, sign * strong / 2, strong / 2;
  MemoryKernel k = MemoryKernel::lorentzian({w0, w0}, g0, {line});
  Eigen::MatrixXd flat(2, 2);
  flat << weak / 2, -sign * weak / 2, -sign * weak / 2, weak / 2;
  k.add_markov(flat);
  const std::vector<cdouble> c0{1.0, 0.0};
  AmplitudeTrajectory tr =
      solve_volterra(k, Eigen::MatrixXd::Zero(2, 2), c0, {t_max, dt, 1e-3});
  track(tr);
  return tr;
}

Outcome strong_equivalence()
{
  const double strong = 16743.5;
  const double weak = 0.5;
  const double hw = 0.5;
  const double omega = rabi_frequency(strong, hw);
  const std::vector<double> steps{4e-4, 2e-4, 1e-4, 5e-5};
  // whole coarse steps, so that every grid contains the coarse one
  const double t_max = std::ceil(4.0 * pi / omega / steps[0]) * steps[0];
  std::string detail;
  bool ok = true;
  for (int sign : {1, -1}) {
    std::vector<AmplitudeTrajectory> runs;
    for (double dt : steps)
      runs.push_back(strong_run(sign, strong, weak, hw, t_max, dt));
    // deviation from the closed form on the finest grid
    const AmplitudeTrajectory& fine = runs.back();
    const double gp = sign > 0 ? strong : weak;
    const double gm = sign > 0 ? weak : strong;
    const OccupationPair ref = strong_coupling_closed_form(fine.t, gp, gm, hw, 0.0, sign);
    double dev = 0.0;
    for (std::size_t i = 0; i < fine.t.size(); ++i) {
      const int r = static_cast<int>(i);
      dev = std::max({dev, std::abs(fine.probability(r, 0) - ref.p_a[i]),
                      std::abs(fine.probability(r, 1) - ref.p_b[i])});
    }
    // self-convergence under dt halving, compared on the coarsest grid
    std::vector<double> diff;
    for (std::size_t l = 0; l + 1 < runs.size(); ++l) {
      const auto stride = static_cast<std::size_t>(std::llround(steps[0] / steps[l]));
      const auto stride2 = 2 * stride;
      double d = 0.0;
      for (std::size_t i = 0; i < runs[0].t.size(); ++i)
        for (int atom = 0; atom < 2; ++atom)
          d = std::max(d, std::abs(runs[l].amplitude(static_cast<Eigen::Index>(i * stride), atom) -
                                   runs[l + 1].amplitude(static_cast<Eigen::Index>(i * stride2), atom)));
      diff.push_back(d);
    }
    const double p_prev = std::log2(diff[0] / diff[1]);
    const double p_last = std::log2(diff[1] / diff[2]);
    // The estimate still drifts towards its limit; the last change is its
    // uncertainty.
    const double drift = std::abs(p_last - p_prev);
    ok = ok && dev < 0.02 && p_last + drift >= 2.0;
    detail += fmt("branch %c: sup|dP| = %.2e over [0, 4pi/Omega], observed order %.6f, %.6f "
                  "(+- %.1e); ",
                  sign > 0 ? '+' : '-', dev, p_prev, p_last, drift);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome line_shape()
{
  ScenarioConfig c = load_preset("fig1a");
  const auto atoms = c.build_atoms();
  const SphereProvider sp = provider_for(c);
  const double center = nearest_mode(fig1_omega).omega;
  const double step = 5e-8;
  std::vector<double> grid;
  for (int i = -100; i <= 100; ++i)
    grid.push_back(center + step * i);
  const CouplingSpectrum s = sweep_spectrum(atoms, grid, sp);
  const LorentzianResonance fit =
      fit_lorentzian(s, 0, 1, {grid.front(), grid.back()});
  std::vector<double> dab;
  for (const auto& m : s.matrices)
    dab.push_back(m.delta(0, 1));

  // zero crossing nearest the fitted centre
  double zero = 0.0;
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if ((dab[i] > 0) != (dab[i + 1] > 0)) {
      const double z = grid[i] + step * dab[i] / (dab[i] - dab[i + 1]);
      if (std::abs(z - fit.omega_m) < best) {
        best = std::abs(z - fit.omega_m);
        zero = z;
      }
    }
  // |delta_AB| maxima on either side
  auto extremum = [&](bool right) {
    double w = 0.0, v = -1.0;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      if ((grid[i] > fit.omega_m) != right)
        continue;
      const double a = std::abs(dab[i]);
      if (a > std::abs(dab[i - 1]) && a >= std::abs(dab[i + 1]) && a > v) {
        v = a;
        const double y0 = std::abs(dab[i - 1]), y2 = std::abs(dab[i + 1]);
        w = grid[i] + 0.5 * (y0 - y2) / (y0 - 2 * a + y2) * step;
      }
    }
    return w;
  };
  const double left = extremum(false);
  const double right = extremum(true);
  const double hw = fit.half_width;
  const double el = std::abs((fit.omega_m - left) - hw) / hw;
  const double er = std::abs((right - fit.omega_m) - hw) / hw;
  return {best <= step && el < 0.15 && er < 0.15,
          fmt("fit omega_m = %.9f, half width %.3e; zero at %+.2f steps, maxima at -%.3f and "
              "+%.3f half widths",
              fit.omega_m, hw, (zero - fit.omega_m) / step, (fit.omega_m - left) / hw,
              (right - fit.omega_m) / hw)};
}

// Property suites

std::string reciprocity(bool& ok)
{
  const SphereGeometry g = load_preset("fig1a").geometry();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto point = [&] {
      return point_above_surface(g.radius(), 0.02 + 0.3 * u(rng), pi * u(rng), 2 * pi * u(rng));
    };
    const Vec3 r = point(), rp = point();
    const double w = 1.0 + 0.06 * u(rng);
    const Tensor3 a = sphere_scattering_green(r, rp, w, g);
    const Tensor3 b = sphere_scattering_green(rp, r, w, g);
    worst = std::max(worst, (a - b.transpose()).norm() / a.norm());
  }
  ok = ok && worst < 1e-8;
  return fmt("reciprocity %.1e", worst);
}

std::string positivity(bool& ok)
{
  const SphereGeometry g = load_preset("fig1a").geometry();
  const SphereProvider sp(g);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = -1e300;
  double min_eig = 1e300;
  for (int i = 0; i < 100; ++i) {
    std::vector<Atom> atoms(2);
    const double w = 0.95 + 0.15 * u(rng);
    for (Atom& a : atoms) {
      a.position = point_above_surface(g.radius(), 0.01 + 0.5 * u(rng), pi * u(rng), 2 * pi * u(rng));
      a.orientation = CVec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
      a.omega_bare = a.omega_shifted = w;
    }
    const CouplingMatrix m = coupling_matrix(atoms, sp);
    const double bound = std::sqrt(m.gamma(0, 0) * m.gamma(1, 1));
    worst = std::max(worst, (std::abs(m.gamma(0, 1)) - bound) / bound);
    min_eig = std::min({min_eig, m.gamma(0, 0), m.gamma(1, 1)});
  }
  ok = ok && worst <= 1e-10 && min_eig > 0.0;
  return fmt("|Gamma_AB| <= sqrt(Gamma_AA Gamma_BB) on 100 configs (max excess %.1e), "
             "min Gamma_AA %.2e",
             worst, min_eig);
}

// delta_AB from Re G_R against the Hilbert transform of the Gamma_AB(w)
// spectrum, on three surface lines. The spectrum outside the local window
// adds a constant across the line, so the residual's spread is compared.
std::string kramers_kronig(bool& ok)
{
  ScenarioConfig c = load_preset("fig1a");
  const SphereProvider sp = provider_for(c);
  const Mode& m = nearest_mode(fig1_omega);
  const auto& modes = default_modes();
  double worst = 0.0;
  for (int n : {m.n - 1, m.n, m.n + 1}) {
    const double wc = modes[static_cast<std::size_t>(n - 1)].omega;
    const double h = 5e-7;
    std::vector<double> grid;
    for (int i = -120; i < -10; ++i)
      grid.push_back(wc + 0.5 * i * h);
    for (int i = -50; i < 50; ++i)
      grid.push_back(wc + 0.1 * i * h);
    for (int i = 10; i <= 120; ++i)
      grid.push_back(wc + 0.5 * i * h);
    auto atoms = c.build_atoms();
    for (Atom& a : atoms)
      a.omega_shifted = wc;
    const auto rate = pair_rate_spectrum(atoms[0], atoms[1], false, grid, sp, GreenPart::scattering);
    std::vector<double> resid;
    double amp = 0.0;
    for (int i = -8; i <= 8; ++i) {
      const double w = wc + (0.5 * i + 0.05) * h;
      const double kk = pv_shift_from_spectrum(grid, rate, w, -1);
      const Vec3 p[2] = {atoms[0].position, atoms[1].position};
      const GreenBlock b = sp.evaluate_scattering(p, w);
      const cdouble g = atoms[0].orientation.conjugate().dot(b(0, 1).real().cast<cdouble>() *
                                                             atoms[1].orientation);
      const double direct = coupling_scale(atoms[0], atoms[1], w) * g.real();
      resid.push_back(direct - kk);
      amp = std::max(amp, std::abs(kk));
    }
    const auto [lo, hi] = std::minmax_element(resid.begin(), resid.end());
    worst = std::max(worst, (*hi - *lo) / amp);
  }
  ok = ok && worst < 0.02;
  return fmt("KK spread %.2f%%", 100.0 * worst);
}

std::string decoupling(bool& ok)
{
  ScenarioConfig c = load_preset("fig3-curves1");
  const auto atoms = c.build_atoms();
  const SphereProvider sp = provider_for(c);
  const CouplingMatrix cm = coupling_matrix(atoms, sp);
  const double mid = atoms[0].omega_shifted;
  KernelSampling sampling;
  sampling.initial_points = c.run.kernel_points;
  const MemoryKernel k = build_kernel(atoms, sp, {mid - c.run.window, mid + c.run.window}, sampling);
  const Eigen::MatrixXd x = explicit_exchange(cm, k, ExchangeMode::consistent);
  const VolterraOptions opt{0.002, 1e-5, 1e-3};
  const std::vector<cdouble> c0{1.0, 0.0};
  const AmplitudeTrajectory joint = solve_volterra(k, x, c0, opt);
  track(joint);
  const SuperpositionView v = to_superposition(joint, cm, 0.0, 1e-6);
  double worst = 0.0;
  for (int sign : {1, -1}) {
    Eigen::MatrixXd xs(1, 1);
    xs(0, 0) = x(0, 0) + sign * x(0, 1);
    const std::vector<cdouble> cs{1.0 / std::sqrt(2.0)};
    const AmplitudeTrajectory one = solve_volterra(k.superposition(sign), xs, cs, opt);
    track(one);
    for (std::size_t i = 0; i < v.t.size(); ++i) {
      const cdouble rot = std::exp(cdouble(0.0, -sign * cm.delta(0, 1) * v.t[i]));
      const cdouble mine = one.amplitude(static_cast<Eigen::Index>(i), 0) * rot;
      worst = std::max(worst, std::abs(mine - (sign > 0 ? v.c_plus[i] : v.c_minus[i])));
    }
  }
  ok = ok && worst < 1e-6;
  return fmt("+- decoupling %.1e", worst);
}

std::string vacuum(bool& ok)
{
  SphereGeometry g = load_preset("fig1a").geometry();
  g.material.omega_P = 0.0;
  const SphereProvider sp(g);
  const FreeSpaceProvider vac;
  std::vector<Atom> atoms(2);
  atoms[0].position = point_above_surface(g.radius(), 0.02, 0.0, 0.0);
  atoms[1].position = point_above_surface(g.radius(), 0.05, 0.3, 1.0);
  for (Atom& a : atoms)
    a.omega_bare = a.omega_shifted = 1.05;
  const double d = (coupling_matrix(atoms, sp).k() - coupling_matrix(atoms, vac).k()).norm() /
                   coupling_matrix(atoms, vac).k().norm();
  ScenarioConfig c = load_preset("free-space");
  const RunArtifact a = run_scenario(c);
  double dev = 0.0;
  for (double v : column_values(a, "Gamma_AA"))
    dev = std::max(dev, std::abs(v - 1.0));
  ok = ok && d < 1e-12 && dev < 1e-10;
  return fmt("vacuum sphere %.1e, free-space sweep |Gamma_AA - 1| %.1e", d, dev);
}

Outcome property_suites()
{
  bool ok = true;
  std::string detail = reciprocity(ok);
  detail += ", " + positivity(ok);
  detail += ", " + kramers_kronig(ok);
  detail += ", " + decoupling(ok);
  detail += ", " + vacuum(ok);
  // every solver run of this suite, including the scenario runs above
  ok = ok && peak_probability <= 1.0 + 1e-3;
  detail += fmt(", max sum P = %.6f", peak_probability);
  return {ok, detail};
}

Outcome qualitative_regimes()
{
  std::string detail;
  bool ok = true;

  {
    const ScenarioConfig c = load_preset("fig4-i");
    const RunArtifact a = run_scenario(c);
    const auto pa = column_values(a, "P_A");
    const double omega = metadata_value(a, "rabi frequency");
    const double two_delta = 2.0 * std::abs(*c.model.delta_ab);
    // the slow envelope lives at the decay rates; oscillations sit far above
    double bin = 0.0;
    const auto peaks = dft_peaks(pa, c.run.dt, 10.0 * *c.model.half_width, bin);
    bool beat = !peaks.empty() && std::abs(peaks[0].omega - two_delta) <= 0.5 * omega + 3 * bin;
    bool rabi = false;
    for (const Peak& p : peaks)
      rabi = rabi || (std::abs(p.omega - omega) <= 3 * bin && p.height >= 0.1 * peaks[0].height);
    ok = ok && beat && rabi;
    detail += fmt("i: top peak %.0f (2|delta| %.0f), Rabi peak %s; ",
                  peaks.empty() ? 0.0 : peaks[0].omega, two_delta, rabi ? "present" : "missing");
  }
  {
    const ScenarioConfig c = load_preset("fig4-ii");
    const RunArtifact a = run_scenario(c);
    const auto t = column_values(a, "t");
    const auto pa = column_values(a, "P_A");
    const double hw = *c.model.half_width;
    double low = 1.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] >= 1.0 / hw && t[i] <= 3.0 / hw)
        low = std::min(low, pa[i]);
    ok = ok && low > 0.05;
    detail += fmt("ii: min P_A on [1,3]/dw_m = %.3f; ", low);
  }
  {
    const ScenarioConfig c = load_preset("fig4-iii");
    const RunArtifact a = run_scenario(c);
    const auto pa = column_values(a, "P_A");
    double bin = 0.0;
    const auto peaks = dft_peaks(pa, c.run.dt, 10.0 * *c.model.half_width, bin);
    double second = 0.0;
    for (std::size_t i = 1; i < peaks.size(); ++i)
      if (std::abs(peaks[i].omega - peaks[0].omega) > 3 * bin) {
        second = peaks[i].height;
        break;
      }
    const double ratio = second > 0 ? peaks[0].height / second : 1e300;
    ok = ok && !peaks.empty() && ratio >= 2.0;
    detail += fmt("iii: dominant peak %.1f (Omega/2 = %.1f), %.1fx the next",
                  peaks.empty() ? 0.0 : peaks[0].omega,
                  0.5 * metadata_value(a, "rabi frequency"), ratio);
  }
  return {ok, detail};
}

} // namespace

int main()
{
  struct Criterion
  {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "free-space rate anchor", free_space_anchor},
      {2, "sphere resonance location", resonance_location},
      {3, "figure-3 coupling numbers", figure3_numbers},
      {4, "Rabi frequency", rabi_frequency_check},
      {5, "weak-coupling equivalence", weak_equivalence},
      {6, "strong-coupling equivalence", strong_equivalence},
      {7, "Lorentzian line shape of delta_AB", line_shape},
      {8, "property suites", property_suites},
      {9, "qualitative regimes", qualitative_regimes},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
