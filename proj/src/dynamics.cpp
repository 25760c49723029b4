#include "dipolium/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dipolium/error.hpp"
#include "dipolium/quadrature.hpp"

namespace dipolium {

// ---------------------------------------------------------------------------
// Kernel construction

MemoryKernel MemoryKernel::sampled(const SpectrumFunction& spectrum,
                                   std::vector<double> atom_frequencies,
                                   double gamma0_ref, KernelWindow window,
                                   const KernelSampling& sampling)
{
  if (atom_frequencies.empty())
    throw DomainError("MemoryKernel: at least one atom required");
  if (!(gamma0_ref > 0.0))
    throw DomainError("MemoryKernel: gamma0_ref must be positive");
  if (!(window.hi > window.lo) || !(window.lo > 0.0))
    throw DomainError("MemoryKernel: window must satisfy 0 < lo < hi");
  for (double w : atom_frequencies)
    if (!(w > window.lo && w < window.hi))
      throw DomainError("MemoryKernel: window excludes an atom frequency");
  if (sampling.initial_points < 3 || !(sampling.refine_tolerance > 0.0))
    throw DomainError("MemoryKernel: invalid sampling control");

  MemoryKernel k;
  k.frequencies_ = std::move(atom_frequencies);
  k.gamma0_ref_ = gamma0_ref;
  k.window_ = window;
  const int n = k.atoms();
  k.markov_ = Eigen::MatrixXd::Zero(n, n);

  struct Node
  {
    double w;
    Eigen::MatrixXcd s;
  };
  auto evaluate = [&](const std::vector<double>& ws) {
    std::vector<Node> out(ws.size());
    parallel_for(ws.size(), 0, [&](std::size_t i) {
      Eigen::MatrixXcd s = spectrum(ws[i]);
      if (s.rows() != n || s.cols() != n)
        throw DomainError("MemoryKernel: spectrum has the wrong shape");
      out[i] = {ws[i], std::move(s)};
    });
    return out;
  };

  std::vector<double> init(static_cast<std::size_t>(sampling.initial_points));
  for (int i = 0; i < sampling.initial_points; ++i)
    init[static_cast<std::size_t>(i)] =
        window.lo + (window.hi - window.lo) * i / (sampling.initial_points - 1);
  std::vector<Node> nodes = evaluate(init);

  double peak = 0.0;
  for (const Node& nd : nodes)
    peak = std::max(peak, nd.s.cwiseAbs().maxCoeff());

  // Bisect intervals until linear interpolation reproduces the midpoint.
  std::vector<std::size_t> active(nodes.size() - 1);
  for (std::size_t i = 0; i < active.size(); ++i)
    active[i] = i;
  while (!active.empty()) {
    std::vector<double> mids;
    mids.reserve(active.size());
    for (std::size_t i : active)
      mids.push_back(0.5 * (nodes[i].w + nodes[i + 1].w));
    const std::vector<Node> mid_nodes = evaluate(mids);
    for (const Node& nd : mid_nodes)
      peak = std::max(peak, nd.s.cwiseAbs().maxCoeff());

    std::vector<char> refine(nodes.size(), 0);
    std::vector<char> split(nodes.size(), 0);
    std::vector<const Node*> mid_of(nodes.size(), nullptr);
    for (std::size_t q = 0; q < active.size(); ++q) {
      const std::size_t i = active[q];
      const Eigen::MatrixXcd lin = 0.5 * (nodes[i].s + nodes[i + 1].s);
      const double err = (mid_nodes[q].s - lin).cwiseAbs().maxCoeff();
      split[i] = 1;
      mid_of[i] = &mid_nodes[q];
      refine[i] = err > sampling.refine_tolerance * peak ? 1 : 0;
    }
    std::vector<Node> merged;
    std::vector<std::size_t> next;
    merged.reserve(nodes.size() + mid_nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      merged.push_back(nodes[i]);
      if (i + 1 < nodes.size() && split[i]) {
        if (refine[i])
          next.push_back(merged.size() - 1);
        merged.push_back(*mid_of[i]);
        if (refine[i])
          next.push_back(merged.size() - 1);
      }
    }
    nodes = std::move(merged);
    active = std::move(next);
    if (static_cast<int>(nodes.size()) > sampling.max_points)
      throw ConvergenceError(
          "MemoryKernel: spectrum not resolved with " +
              std::to_string(sampling.max_points) +
              " points; narrow the window or raise the point limit",
          static_cast<double>(nodes.size()));
    const double spacing = nodes.size() > 1 ? (window.hi - window.lo) * 1e-14 : 0.0;
    for (std::size_t i : active)
      if (nodes[i + 1].w - nodes[i].w < spacing)
        throw ConvergenceError("MemoryKernel: spectrum has a non-resolvable jump");
  }

  k.grid_.reserve(nodes.size());
  k.samples_.assign(static_cast<std::size_t>(n * n), {});
  for (const Node& nd : nodes) {
    k.grid_.push_back(nd.w);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        k.samples_[k.pair(a, b)].push_back(nd.s(a, b));
  }
  return k;
}

MemoryKernel MemoryKernel::lorentzian(std::vector<double> atom_frequencies,
                                      double gamma0_ref,
                                      std::vector<LorentzianResonance> lines)
{
  if (atom_frequencies.empty())
    throw DomainError("MemoryKernel: at least one atom required");
  if (!(gamma0_ref > 0.0))
    throw DomainError("MemoryKernel: gamma0_ref must be positive");
  MemoryKernel k;
  k.frequencies_ = std::move(atom_frequencies);
  k.gamma0_ref_ = gamma0_ref;
  const int n = k.atoms();
  for (const LorentzianResonance& l : lines) {
    if (!(l.half_width > 0.0))
      throw DomainError("MemoryKernel: Lorentzian half width must be positive");
    if (l.weight.rows() != n || l.weight.cols() != n)
      throw DomainError("MemoryKernel: Lorentzian weight has the wrong shape");
  }
  k.lines_ = std::move(lines);
  k.markov_ = Eigen::MatrixXd::Zero(n, n);
  return k;
}

MemoryKernel& MemoryKernel::add_markov(const Eigen::MatrixXd& rates)
{
  if (rates.rows() != atoms() || rates.cols() != atoms())
    throw DomainError("MemoryKernel::add_markov: wrong shape");
  markov_ += rates;
  return *this;
}

cdouble MemoryKernel::spectrum(int a, int ap, double omega) const
{
  cdouble s = markov_(a, ap);
  if (is_sampled()) {
    if (omega >= grid_.front() && omega <= grid_.back()) {
      const auto it = std::upper_bound(grid_.begin(), grid_.end(), omega);
      const std::size_t j = it == grid_.end()
                                ? grid_.size() - 2
                                : static_cast<std::size_t>(it - grid_.begin()) - 1;
      const auto& v = samples_[pair(a, ap)];
      const double t = (omega - grid_[j]) / (grid_[j + 1] - grid_[j]);
      s += v[j] + t * (v[j + 1] - v[j]);
    }
  }
  for (const LorentzianResonance& l : lines_) {
    const double d = omega - l.omega_m;
    const double h2 = l.half_width * l.half_width;
    s += l.weight(a, ap) * h2 / (d * d + h2);
  }
  return s;
}

cdouble MemoryKernel::value(int a, int ap, double tau) const
{
  if (tau < 0.0)
    throw DomainError("MemoryKernel::value: tau must be non-negative");
  cdouble v = 0.0;
  if (is_sampled()) {
    std::vector<double> nu(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i)
      nu[i] = detuning(ap, grid_[i]);
    v += -filon_linear(nu, samples_[pair(a, ap)], tau) / (2.0 * pi);
  }
  for (const LorentzianResonance& l : lines_) {
    const double width = l.half_width / gamma0_ref_;
    const double center = detuning(ap, l.omega_m);
    v += -0.5 * l.weight(a, ap) * width * std::exp(-cdouble(width, center) * tau);
  }
  return v;
}

double MemoryKernel::window_shift(int a, int ap) const
{
  if (!is_sampled())
    return 0.0;
  std::vector<double> nu(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i)
    nu[i] = detuning(ap, grid_[i]);
  return pv_integral_linear(nu, samples_[pair(a, ap)], 0.0).real() / (2.0 * pi);
}

MemoryKernel MemoryKernel::superposition(int sign) const
{
  if (atoms() != 2)
    throw DomainError("MemoryKernel::superposition: requires two atoms");
  if (sign != 1 && sign != -1)
    throw DomainError("MemoryKernel::superposition: sign must be +1 or -1");
  if (frequencies_[0] != frequencies_[1])
    throw DomainError("MemoryKernel::superposition: atoms must share w~");
  MemoryKernel k;
  k.frequencies_ = {frequencies_[0]};
  k.gamma0_ref_ = gamma0_ref_;
  k.window_ = window_;
  k.grid_ = grid_;
  if (is_sampled()) {
    std::vector<cdouble> s(grid_.size());
    const auto& s00 = samples_[pair(0, 0)];
    const auto& s01 = samples_[pair(0, 1)];
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = s00[i] + static_cast<double>(sign) * s01[i];
    k.samples_ = {std::move(s)};
  }
  for (const LorentzianResonance& l : lines_) {
    LorentzianResonance c = l;
    c.weight = Eigen::MatrixXd::Constant(1, 1, l.weight(0, 0) + sign * l.weight(0, 1));
    k.lines_.push_back(std::move(c));
  }
  k.markov_ = Eigen::MatrixXd::Constant(1, 1, markov_(0, 0) + sign * markov_(0, 1));
  return k;
}

// ---------------------------------------------------------------------------
// Product-integration weights

namespace {

struct Samples
{
  std::vector<double> nu;
  std::vector<cdouble> s;
};

// Nodes of the piecewise-linear spectrum restricted to [lo, hi], with extra
// nodes so that no interval is wider than width(nu).
template <class Width>
Samples restrict_and_subdivide(const std::vector<double>& nu,
                               const std::vector<cdouble>& s, double lo,
                               double hi, Width width)
{
  Samples out;
  lo = std::max(lo, nu.front());
  hi = std::min(hi, nu.back());
  if (!(hi > lo))
    return out;
  auto interp = [&](double x) {
    auto it = std::upper_bound(nu.begin(), nu.end(), x);
    std::size_t j = it == nu.end() ? nu.size() - 2
                                   : static_cast<std::size_t>(it - nu.begin()) - 1;
    const double t = (x - nu[j]) / (nu[j + 1] - nu[j]);
    return s[j] + t * (s[j + 1] - s[j]);
  };
  std::vector<double> pts{lo};
  for (double x : nu)
    if (x > lo && x < hi)
      pts.push_back(x);
  pts.push_back(hi);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    const double w = width(std::min(std::abs(a), std::abs(b)));
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / w)));
    for (int q = 0; q < pieces; ++q) {
      const double x = a + (b - a) * q / pieces;
      out.nu.push_back(x);
      out.s.push_back(interp(x));
    }
  }
  out.nu.push_back(hi);
  out.s.push_back(interp(hi));
  return out;
}

// Filon integrals int f_v(nu) e^{-i nu T} dnu at T = m dt, m = 0..count-1,
// for several piecewise-linear f_v on the same nodes. out[v][m].
void filon_sweep(const std::vector<double>& nu,
                 const std::vector<std::vector<cdouble>>& f, double dt,
                 int count, std::vector<std::vector<cdouble>>& out)
{
  const std::size_t nv = f.size();
  out.assign(nv, std::vector<cdouble>(static_cast<std::size_t>(count), 0.0));
  if (nu.size() < 2)
    return;
  const std::size_t nn = nu.size();
  std::vector<cdouble> step(nn), phase(nn, 1.0);
  for (std::size_t i = 0; i < nn; ++i)
    step[i] = std::exp(cdouble(0.0, -nu[i] * dt));
  for (int m = 0; m < count; ++m) {
    const double t = m * dt;
    if (m > 0) {
      if (m % 128 == 0)
        for (std::size_t i = 0; i < nn; ++i)
          phase[i] = std::exp(cdouble(0.0, -nu[i] * t));
      else
        for (std::size_t i = 0; i < nn; ++i)
          phase[i] *= step[i];
    }
    for (std::size_t i = 0; i + 1 < nn; ++i) {
      const double h = nu[i + 1] - nu[i];
      const cdouble alpha(0.0, -h * t);
      cdouble cf, cr; // coefficients of f_i and f_{i+1}
      if (std::abs(alpha) < 1.0) {
        const HatMoments hm = hat_moments(alpha);
        cf = h * phase[i] * hm.falling;
        cr = h * phase[i] * hm.rising;
      } else {
        const cdouble a2 = alpha * alpha;
        cf = h * (phase[i + 1] - phase[i] - alpha * phase[i]) / a2;
        cr = h * (phase[i + 1] * (alpha - 1.0) + phase[i]) / a2;
      }
      for (std::size_t v = 0; v < nv; ++v)
        out[v][static_cast<std::size_t>(m)] += cf * f[v][i] + cr * f[v][i + 1];
    }
  }
}

} // namespace

MemoryKernel::Weights MemoryKernel::weights(double dt, int n_steps) const
{
  if (!(dt > 0.0) || n_steps < 0)
    throw DomainError("MemoryKernel::weights: need dt > 0, n_steps >= 0");
  const int n = atoms();
  const auto npairs = static_cast<std::size_t>(n * n);
  Weights w;
  w.start.assign(npairs, 0.0);
  w.full.assign(npairs, std::vector<cdouble>(static_cast<std::size_t>(n_steps), 0.0));
  w.tail.assign(npairs, std::vector<cdouble>(static_cast<std::size_t>(n_steps), 0.0));

  for (int a = 0; a < n; ++a)
    for (int ap = 0; ap < n; ++ap) {
      const std::size_t p = pair(a, ap);
      auto& U = w.start[p];
      auto& W = w.full[p];
      auto& V = w.tail[p];

      for (const LorentzianResonance& l : lines_) {
        // k = c e^{b tau}
        const double width = l.half_width / gamma0_ref_;
        const cdouble c = -0.5 * l.weight(a, ap) * width;
        const cdouble b = -cdouble(width, detuning(ap, l.omega_m));
        const cdouble alpha = b * dt;
        const HatMoments plus = hat_moments(alpha);
        const HatMoments minus = hat_moments(-alpha);
        U += c * dt * plus.falling;
        const cdouble hat = plus.falling + minus.falling;
        const cdouble decay = std::exp(alpha);
        cdouble e = 1.0; // e^{b (m-1) dt}
        for (int m = 1; m <= n_steps; ++m) {
          const auto i = static_cast<std::size_t>(m - 1);
          V[i] += c * dt * e * plus.rising;
          e *= decay;
          W[i] += c * dt * e * hat;
        }
      }

      if (!is_sampled())
        continue;

      std::vector<double> nu(grid_.size());
      for (std::size_t i = 0; i < grid_.size(); ++i)
        nu[i] = detuning(ap, grid_[i]);
      const auto& s = samples_[p];
      const double edge = 1.0 / dt;
      const double fine = 0.05 / dt;
      const double scale = -dt / (2.0 * pi);

      // |nu dt| < 1: the hat transforms are smooth; linearize S * g.
      const Samples inner = restrict_and_subdivide(nu, s, -edge, edge,
                                                   [&](double) { return fine; });
      if (inner.nu.size() >= 2) {
        std::vector<cdouble> g_u(inner.nu.size()), g_w(inner.nu.size()),
            g_v(inner.nu.size());
        for (std::size_t i = 0; i < inner.nu.size(); ++i) {
          const cdouble al(0.0, -inner.nu[i] * dt);
          const HatMoments hp = hat_moments(al);
          const HatMoments hm = hat_moments(-al);
          g_u[i] = inner.s[i] * hp.falling;
          g_w[i] = inner.s[i] * (hp.falling + hm.falling);
          g_v[i] = inner.s[i] * hp.rising;
        }
        std::vector<std::vector<cdouble>> out;
        filon_sweep(inner.nu, {g_u}, dt, 1, out);
        U += scale * out[0][0];
        filon_sweep(inner.nu, {g_w, g_v}, dt, n_steps + 1, out);
        for (int m = 1; m <= n_steps; ++m) {
          const auto i = static_cast<std::size_t>(m - 1);
          W[i] += scale * out[0][static_cast<std::size_t>(m)];
          V[i] += scale * out[1][static_cast<std::size_t>(m - 1)];
        }
      }

      // |nu dt| >= 1: split the hat transforms into pure exponentials times
      // S/a and S/a^2 (a = -i nu dt), which are smooth there.
      auto outer_width = [&](double x) { return std::max(fine, 0.02 * x); };
      for (int side = -1; side <= 1; side += 2) {
        const Samples o = side < 0
                              ? restrict_and_subdivide(nu, s, nu.front(), -edge, outer_width)
                              : restrict_and_subdivide(nu, s, edge, nu.back(), outer_width);
        if (o.nu.size() < 2)
          continue;
        std::vector<cdouble> f1(o.nu.size()), f2(o.nu.size());
        for (std::size_t i = 0; i < o.nu.size(); ++i) {
          const cdouble al(0.0, -o.nu[i] * dt);
          f1[i] = o.s[i] / al;
          f2[i] = o.s[i] / (al * al);
        }
        std::vector<std::vector<cdouble>> out;
        filon_sweep(o.nu, {f1, f2}, dt, n_steps + 2, out);
        const auto& phi1 = out[0];
        const auto& phi2 = out[1];
        U += scale * (phi2[1] - phi2[0] - phi1[0]);
        for (int m = 1; m <= n_steps; ++m) {
          const auto i = static_cast<std::size_t>(m - 1);
          const auto mm = static_cast<std::size_t>(m);
          W[i] += scale * (phi2[mm + 1] + phi2[mm - 1] - 2.0 * phi2[mm]);
          V[i] += scale * (phi1[mm] - phi2[mm] + phi2[mm - 1]);
        }
      }
    }
  return w;
}

MemoryKernel build_kernel(std::span<const Atom> atoms, const GreenProvider& green,
                          KernelWindow window, const KernelSampling& sampling)
{
  if (atoms.empty())
    throw DomainError("build_kernel: at least one atom required");
  for (const Atom& a : atoms)
    a.validate();
  std::vector<double> freqs;
  std::vector<Vec3> pts;
  for (const Atom& a : atoms) {
    freqs.push_back(a.omega_shifted);
    pts.push_back(a.position);
  }
  const double g0 = atoms.front().gamma0;
  const int n = static_cast<int>(atoms.size());
  std::vector<Atom> local(atoms.begin(), atoms.end());
  auto spectrum = [&, local](double w) {
    const GreenBlock b = green.evaluate(pts, w);
    Eigen::MatrixXcd s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Atom& x = local[static_cast<std::size_t>(i)];
        const Atom& y = local[static_cast<std::size_t>(j)];
        const Eigen::Matrix3d im = b(i, j).imag();
        const cdouble form = (x.unit_dipole().conjugate().transpose() *
                              im.cast<cdouble>() * y.unit_dipole())(0, 0);
        s(i, j) = 2.0 * coupling_scale(x, y, w) * form / g0;
      }
    return s;
  };
  return MemoryKernel::sampled(spectrum, std::move(freqs), g0, window, sampling);
}

Eigen::MatrixXd explicit_exchange(const CouplingMatrix& couplings,
                                  const MemoryKernel& kernel, ExchangeMode mode)
{
  const int n = couplings.size();
  if (n != kernel.atoms())
    throw DomainError("explicit_exchange: coupling and kernel sizes differ");
  const double ratio = couplings.gamma0_ref() / kernel.gamma0_ref();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a != b)
        x(a, b) = couplings.delta(a, b) * ratio;
      if (mode == ExchangeMode::consistent)
        x(a, b) -= kernel.window_shift(a, b);
    }
  return x;
}

// ---------------------------------------------------------------------------
// Time march

double AmplitudeTrajectory::total_probability(int step) const
{
  return amplitude.row(step).squaredNorm();
}

AmplitudeTrajectory solve_volterra(const MemoryKernel& kernel,
                                   const Eigen::MatrixXd& explicit_coupling,
                                   std::span<const cdouble> initial,
                                   const VolterraOptions& options)
{
  const int n = kernel.atoms();
  if (static_cast<int>(initial.size()) != n)
    throw DomainError("solve_volterra: initial amplitudes do not match the atom count");
  if (explicit_coupling.rows() != n || explicit_coupling.cols() != n)
    throw DomainError("solve_volterra: explicit coupling has the wrong shape");
  if (!(options.dt > 0.0) || !(options.t_max >= 0.0))
    throw DomainError("solve_volterra: need dt > 0 and t_max >= 0");
  double norm0 = 0.0;
  for (const cdouble& c : initial)
    norm0 += std::norm(c);
  if (norm0 > 1.0 + 1e-12)
    throw DomainError("solve_volterra: initial occupation exceeds 1");

  const int steps = static_cast<int>(std::llround(options.t_max / options.dt));
  const double dt = options.dt;
  AmplitudeTrajectory traj;
  traj.t.resize(static_cast<std::size_t>(steps) + 1);
  traj.amplitude.resize(steps + 1, n);
  for (int a = 0; a < n; ++a)
    traj.amplitude(0, a) = initial[static_cast<std::size_t>(a)];
  traj.t[0] = 0.0;
  if (steps == 0)
    return traj;

  const MemoryKernel::Weights w = kernel.weights(dt, steps);
  const auto& freq = kernel.atom_frequencies();
  Eigen::MatrixXd detune(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      detune(a, b) = (freq[static_cast<std::size_t>(a)] - freq[static_cast<std::size_t>(b)]) /
                     kernel.gamma0_ref();
  const Eigen::MatrixXcd local =
      I * explicit_coupling.cast<cdouble>() - 0.5 * kernel.markov().cast<cdouble>();
  auto pidx = [n](int a, int b) { return static_cast<std::size_t>(a * n + b); };
  auto phases = [&](double t) {
    Eigen::MatrixXcd p(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        p(a, b) = detune(a, b) == 0.0 ? cdouble(1.0) : std::exp(cdouble(0.0, detune(a, b) * t));
    return p;
  };
  Eigen::MatrixXcd ustart(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      ustart(a, b) = w.start[pidx(a, b)];

  Eigen::VectorXcd c_prev = traj.amplitude.row(0).transpose();
  Eigen::VectorXcd f_prev = phases(0.0).cwiseProduct(local) * c_prev;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);

  for (int step = 1; step <= steps; ++step) {
    const double t = step * dt;
    traj.t[static_cast<std::size_t>(step)] = t;
    const Eigen::MatrixXcd ph = phases(t);
    // History part of the memory integral (all nodes but the newest).
    Eigen::VectorXcd hist = Eigen::VectorXcd::Zero(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const auto& W = w.full[pidx(a, b)];
        cdouble acc = w.tail[pidx(a, b)][static_cast<std::size_t>(step - 1)] *
                      traj.amplitude(0, b);
        for (int j = 1; j < step; ++j)
          acc += W[static_cast<std::size_t>(step - j - 1)] * traj.amplitude(j, b);
        hist(a) += ph(a, b) * acc;
      }
    const Eigen::MatrixXcd a_now = ph.cwiseProduct(local + ustart);
    const Eigen::MatrixXcd lhs = id - 0.5 * dt * a_now;
    const Eigen::VectorXcd rhs = c_prev + 0.5 * dt * (f_prev + hist);
    const Eigen::VectorXcd c = lhs.partialPivLu().solve(rhs);
    traj.amplitude.row(step) = c.transpose();
    f_prev = a_now * c + hist;
    c_prev = c;

    const double total = c.squaredNorm();
    if (!(total <= 1.0 + options.probability_slack))
      throw ConvergenceError("solve_volterra: total occupation " + std::to_string(total) +
                                 " exceeds 1 at t = " + std::to_string(t) +
                                 "; reduce dt",
                             total);
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Superpositions and closed forms

SuperpositionView to_superposition(const AmplitudeTrajectory& trajectory,
                                   const CouplingMatrix& couplings,
                                   double half_width, double tolerance)
{
  if (trajectory.atoms() != 2 || couplings.size() != 2)
    throw DomainError("to_superposition: requires exactly two atoms");
  const Eigen::MatrixXcd& k = couplings.k();
  const double scale = k.cwiseAbs().maxCoeff();
  if (std::abs(k(0, 0) - k(1, 1)) > tolerance * scale)
    throw DomainError("to_superposition: symmetry K_A*A = K_B*B violated");
  if (std::abs(k(0, 1) - k(1, 0)) > tolerance * scale)
    throw DomainError("to_superposition: symmetry K_A*B = K_B*A violated");

  SuperpositionView v;
  v.t = trajectory.t;
  const double delta = couplings.delta(0, 1);
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < v.t.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const cdouble ca = trajectory.amplitude(row, 0);
    const cdouble cb = trajectory.amplitude(row, 1);
    const cdouble rot = std::exp(cdouble(0.0, -delta * v.t[i]));
    v.c_plus.push_back(r * (ca + cb) * rot);
    v.c_minus.push_back(r * (ca - cb) * std::conj(rot));
  }
  v.gamma_plus = couplings.gamma(0, 0) + couplings.gamma(0, 1);
  v.gamma_minus = couplings.gamma(0, 0) - couplings.gamma(0, 1);
  if (half_width > 0.0) {
    v.omega_plus = v.gamma_plus > 0.0 ? rabi_frequency(v.gamma_plus, half_width) : 0.0;
    v.omega_minus = v.gamma_minus > 0.0 ? rabi_frequency(v.gamma_minus, half_width) : 0.0;
  }
  return v;
}

OccupationPair weak_coupling_closed_form(std::span<const double> t,
                                         double gamma_aa, double gamma_ab,
                                         double delta_ab)
{
  if (!(gamma_aa >= 0.0))
    throw DomainError("weak_coupling_closed_form: Gamma_BB must be non-negative");
  if (std::abs(gamma_ab) > gamma_aa)
    throw DomainError("weak_coupling_closed_form: |Gamma_AB| > Gamma_BB");
  OccupationPair p;
  for (double x : t) {
    const double decay = std::exp(-gamma_aa * x);
    const double ch = 0.5 * (std::exp((gamma_ab - gamma_aa) * x) +
                             std::exp((-gamma_ab - gamma_aa) * x));
    const double cs = std::cos(2.0 * delta_ab * x) * decay;
    p.p_a.push_back(0.5 * (ch + cs));
    p.p_b.push_back(0.5 * (ch - cs));
  }
  return p;
}

double rabi_frequency(double gamma_strong, double half_width)
{
  if (!(gamma_strong > 0.0) || !(half_width > 0.0))
    throw DomainError("rabi_frequency: rates must be positive");
  return std::sqrt(2.0 * gamma_strong * half_width);
}

OccupationPair strong_coupling_closed_form(std::span<const double> t,
                                           double gamma_plus,
                                           double gamma_minus,
                                           double half_width, double delta_ab,
                                           int branch)
{
  if (branch != 1 && branch != -1)
    throw DomainError("strong_coupling_closed_form: branch must be +1 or -1");
  const double strong = branch > 0 ? gamma_plus : gamma_minus;
  const double weak = branch > 0 ? gamma_minus : gamma_plus;
  if (!(weak >= 0.0))
    throw DomainError("strong_coupling_closed_form: weak-branch rate must be >= 0");
  const double omega = rabi_frequency(strong, half_width);
  OccupationPair p;
  for (double x : t) {
    const double cs = std::exp(-0.5 * half_width * x) * std::cos(0.5 * omega * x);
    const double cw = std::exp(-0.5 * weak * x);
    const double cross = 2.0 * cs * cw * std::cos(2.0 * delta_ab * x);
    p.p_a.push_back(0.25 * (cs * cs + cw * cw + cross));
    p.p_b.push_back(0.25 * (cs * cs + cw * cw - cross));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Lorentzian fit

namespace {

struct FitResult
{
  double weight, center, width, background, rms;
};

// Levenberg-Marquardt for y = w h^2 / ((x - c)^2 + h^2) + b on x scaled to
// O(1) around the initial peak.
FitResult lm_fit(const std::vector<double>& x, const std::vector<double>& y,
                 Eigen::Vector4d p)
{
  const auto n = x.size();
  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r,
                       Eigen::MatrixXd* jac) {
    r.resize(static_cast<Eigen::Index>(n));
    if (jac)
      jac->resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - q[1];
      const double h2 = q[2] * q[2];
      const double den = d * d + h2;
      const double l = h2 / den;
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = q[0] * l + q[3] - y[i];
      if (jac) {
        (*jac)(row, 0) = l;
        (*jac)(row, 1) = q[0] * h2 * 2.0 * d / (den * den);
        (*jac)(row, 2) = q[0] * 2.0 * q[2] * d * d / (den * den);
        (*jac)(row, 3) = 1.0;
      }
    }
  };
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  residuals(p, r, &j);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < 500; ++it) {
    const Eigen::Matrix4d jtj = j.transpose() * j;
    const Eigen::Vector4d g = j.transpose() * r;
    Eigen::Matrix4d a = jtj;
    a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
    const Eigen::Vector4d step = a.ldlt().solve(-g);
    Eigen::Vector4d trial = p + step;
    trial[2] = std::abs(trial[2]);
    Eigen::VectorXd rt;
    residuals(trial, rt, nullptr);
    const double ct = rt.squaredNorm();
    if (ct < cost) {
      const bool done = (cost - ct) <= 1e-30 + 1e-24 * cost &&
                        step.norm() <= 1e-14 * (1.0 + p.norm());
      p = trial;
      cost = ct;
      residuals(p, r, &j);
      lambda = std::max(lambda * 0.3, 1e-15);
      if (done)
        break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e16)
        break;
    }
  }
  return {p[0], p[1], p[2], p[3], std::sqrt(cost / static_cast<double>(n))};
}

} // namespace

LorentzianResonance fit_lorentzian(std::span<const double> omega,
                                   std::span<const double> rate,
                                   KernelWindow window)
{
  if (omega.size() != rate.size())
    throw DomainError("fit_lorentzian: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < omega.size(); ++i)
    if (omega[i] >= window.lo && omega[i] <= window.hi) {
      x.push_back(omega[i]);
      y.push_back(rate[i]);
    }
  if (x.size() < 8)
    throw DomainError("fit_lorentzian: fewer than 8 points in the window");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1]))
      throw DomainError("fit_lorentzian: frequencies must increase");

  const auto peak_it = std::max_element(y.begin(), y.end());
  const auto ip = static_cast<std::size_t>(peak_it - y.begin());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double height = *peak_it - ymin;
  if (!(height > 0.0))
    throw ConvergenceError("fit_lorentzian: no peak in the window");
  // Initial half width from the half-maximum crossings.
  const double half = ymin + 0.5 * height;
  std::size_t lo = ip, hi = ip;
  while (lo > 0 && y[lo] > half)
    --lo;
  while (hi + 1 < y.size() && y[hi] > half)
    ++hi;
  double hw0 = 0.5 * (x[hi] - x[lo]);
  if (!(hw0 > 0.0))
    hw0 = x[1] - x[0];

  const double x0 = x[ip];
  const double yscale = std::max(std::abs(*peak_it), std::abs(ymin));
  std::vector<double> xs(x.size()), ys(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xs[i] = (x[i] - x0) / hw0;
    ys[i] = y[i] / yscale;
  }
  const FitResult f = lm_fit(xs, ys, Eigen::Vector4d(height / yscale, 0.0, 1.0, ymin / yscale));

  LorentzianResonance res;
  res.omega_m = x0 + f.center * hw0;
  res.half_width = std::abs(f.width) * hw0;
  res.weight = Eigen::MatrixXd::Constant(1, 1, f.weight * yscale);
  res.background = f.background * yscale;
  res.residual = f.rms * yscale / std::max(std::abs(*peak_it), 1e-300);

  if (res.residual > 0.1)
    throw ConvergenceError("fit_lorentzian: poor isolation, rms residual " +
                               std::to_string(res.residual) + " of the peak",
                           res.residual);
  // A secondary peak shows up as a local maximum of the residual.
  const double w_abs = std::abs(res.weight(0, 0));
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double d = x[i] - res.omega_m;
    const double model = res.weight(0, 0) * res.half_width * res.half_width /
                             (d * d + res.half_width * res.half_width) +
                         res.background;
    const double excess = y[i] - model;
    if (excess > 0.2 * w_abs && y[i] >= y[i - 1] && y[i] >= y[i + 1])
      throw ConvergenceError("fit_lorentzian: poor isolation, second peak at " +
                                 std::to_string(x[i]),
                             excess / w_abs);
  }
  if (!(res.half_width > 0.0) || res.omega_m < window.lo || res.omega_m > window.hi)
    throw ConvergenceError("fit_lorentzian: fitted line outside the window");
  return res;
}

LorentzianResonance fit_lorentzian(const CouplingSpectrum& spectrum, int a, int b,
                                   KernelWindow window)
{
  if (spectrum.omega.empty())
    throw DomainError("fit_lorentzian: empty spectrum");
  const int n = spectrum.matrices.front().size();
  if (a < 0 || b < 0 || a >= n || b >= n)
    throw DomainError("fit_lorentzian: pair index out of range");
  std::vector<double> w(spectrum.omega), y;
  std::vector<std::size_t> order(w.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto p, auto q) { return w[p] < w[q]; });
  std::vector<double> ws;
  for (std::size_t i : order) {
    ws.push_back(spectrum.omega[i]);
    y.push_back(spectrum.matrices[i].gamma(a, b));
  }
  LorentzianResonance res = fit_lorentzian(ws, y, window);

  // Weights of every pair at the fitted line shape (linear least squares).
  Eigen::MatrixXd weight(n, n);
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < ws.size(); ++i)
    if (ws[i] >= window.lo && ws[i] <= window.hi)
      inside.push_back(i);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(inside.size()), 2);
  for (std::size_t q = 0; q < inside.size(); ++q) {
    const double d = ws[inside[q]] - res.omega_m;
    const double h2 = res.half_width * res.half_width;
    basis(static_cast<Eigen::Index>(q), 0) = h2 / (d * d + h2);
    basis(static_cast<Eigen::Index>(q), 1) = 1.0;
  }
  const auto qr = basis.colPivHouseholderQr();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(inside.size()));
      for (std::size_t q = 0; q < inside.size(); ++q)
        rhs(static_cast<Eigen::Index>(q)) = spectrum.matrices[order[inside[q]]].gamma(i, j);
      weight(i, j) = qr.solve(rhs)(0);
    }
  res.weight = weight;
  return res;
}

Regime classify_regime(double gamma_strong, double half_width)
{
  if (!(gamma_strong > 0.0) || !(half_width > 0.0))
    throw DomainError("classify_regime: rates must be positive");
  if (gamma_strong >= 10.0 * half_width)
    return Regime::strong;
  if (gamma_strong <= 0.1 * half_width)
    return Regime::weak;
  return Regime::crossover;
}

std::string to_string(Regime regime)
{
  switch (regime) {
  case Regime::weak:
    return "weak";
  case Regime::strong:
    return "strong";
  case Regime::crossover:
    return "crossover";
  }
  return "unknown";
}

} // namespace dipolium
