#include "dipolium/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "dipolium/error.hpp"
#include "dipolium/quadrature.hpp"

namespace dipolium {

void Atom::validate() const
{
  if (!position.allFinite())
    throw DomainError("atom position must be finite");
  if (!(orientation.norm() > 0.0) || !orientation.allFinite())
    throw DomainError("atom dipole must be non-zero");
  if (!(omega_bare > 0.0))
    throw DomainError("atom bare frequency must be positive");
  if (!(omega_shifted > 0.0))
    throw DomainError("atom shifted frequency must be positive");
  if (!(gamma0 > 0.0))
    throw DomainError("atom gamma0 must be positive");
}

CVec3 Atom::unit_dipole() const
{
  return orientation / orientation.norm();
}

CouplingMatrix::CouplingMatrix(Eigen::MatrixXcd k, double frequency,
                               double gamma0_ref)
    : k_(std::move(k)), frequency_(frequency), gamma0_ref_(gamma0_ref)
{
  if (k_.rows() != k_.cols())
    throw DomainError("CouplingMatrix: K must be square");
  if (!(gamma0_ref_ > 0.0))
    throw DomainError("CouplingMatrix: gamma0_ref must be positive");
}

double coupling_scale(const Atom& a, const Atom& ap, double omega)
{
  const double wa = a.omega_shifted;
  const double wb = ap.omega_shifted;
  return omega * omega * 1.5 * std::sqrt(a.gamma0 * ap.gamma0 / (wa * wa * wa * wb * wb * wb));
}

namespace {

// Plain bilinear form; the A* rule is applied by the caller.
cdouble bilinear(const CVec3& left, const Tensor3& g, const CVec3& right)
{
  return (left.transpose() * g * right)(0, 0);
}

// e_A^* . G . e_A'
cdouble pair_value(const Atom& a, const Atom& ap, const Tensor3& g)
{
  return bilinear(a.unit_dipole().conjugate(), g, ap.unit_dipole());
}

// Tensor with each entry replaced by its imaginary part.
Tensor3 imag_part(const Tensor3& g)
{
  return g.imag().cast<cdouble>();
}

Tensor3 real_part(const Tensor3& g)
{
  return g.real().cast<cdouble>();
}

std::vector<Vec3> positions(std::span<const Atom> atoms)
{
  std::vector<Vec3> p;
  p.reserve(atoms.size());
  for (const Atom& a : atoms)
    p.push_back(a.position);
  return p;
}

// K from the full tensor, with the diagonal real part restricted to the
// reflection tensor.
cdouble k_entry(const Atom& a, const Atom& ap, double omega, const Tensor3& total,
                const Tensor3* scattering_diag)
{
  const double s = coupling_scale(a, ap, omega);
  if (scattering_diag == nullptr)
    return I * s * pair_value(a, ap, total);
  // Im part of K <- Re G_R; Re part of K <- -Im G_total.
  const cdouble im_total = pair_value(a, ap, imag_part(total));
  const cdouble re_refl = pair_value(a, ap, real_part(*scattering_diag));
  return I * s * (re_refl + I * im_total);
}

} // namespace

cdouble coupling_K_at(const Atom& a, const Atom& ap, double omega,
                      const GreenProvider& green)
{
  a.validate();
  ap.validate();
  if (&a == &ap) {
    const Vec3 p[1] = {a.position};
    const GreenBlock t = green.evaluate(p, omega);
    const GreenBlock r = green.evaluate_scattering(p, omega);
    return k_entry(a, a, omega, t(0, 0), &r(0, 0));
  }
  const Vec3 p[2] = {a.position, ap.position};
  if ((a.position - ap.position).norm() == 0.0)
    throw DomainError("coupling_K: distinct atoms at the same position");
  const GreenBlock t = green.evaluate(p, omega);
  return k_entry(a, ap, omega, t(0, 1), nullptr);
}

cdouble coupling_K(const Atom& a, const Atom& ap, const GreenProvider& green)
{
  return coupling_K_at(a, ap, ap.omega_shifted, green);
}

namespace {

CouplingMatrix matrix_impl(std::span<const Atom> atoms, const double* omega_fixed,
                           const GreenProvider& green)
{
  if (atoms.empty())
    throw DomainError("coupling_matrix: at least one atom required");
  for (const Atom& a : atoms)
    a.validate();
  const int n = static_cast<int>(atoms.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((atoms[static_cast<std::size_t>(i)].position -
           atoms[static_cast<std::size_t>(j)].position).norm() == 0.0)
        throw DomainError("coupling_matrix: two atoms share a position");
  const std::vector<Vec3> pts = positions(atoms);

  std::vector<Atom> local(atoms.begin(), atoms.end());
  if (omega_fixed != nullptr)
    for (Atom& a : local)
      a.omega_shifted = *omega_fixed;

  Eigen::MatrixXcd k(n, n);
  // Columns share a frequency; group atoms by frequency to reuse blocks.
  std::vector<double> freqs;
  for (const Atom& a : local)
    if (std::find(freqs.begin(), freqs.end(), a.omega_shifted) == freqs.end())
      freqs.push_back(a.omega_shifted);
  for (double w : freqs) {
    const GreenBlock total = green.evaluate(pts, w);
    const GreenBlock refl = green.evaluate_scattering(pts, w);
    for (int j = 0; j < n; ++j) {
      const Atom& ap = local[static_cast<std::size_t>(j)];
      if (ap.omega_shifted != w)
        continue;
      for (int i = 0; i < n; ++i) {
        const Atom& a = local[static_cast<std::size_t>(i)];
        k(i, j) = k_entry(a, ap, w, total(i, j), i == j ? &refl(i, i) : nullptr);
      }
    }
  }
  const double ref_w = omega_fixed != nullptr ? *omega_fixed : local[0].omega_shifted;
  return CouplingMatrix(std::move(k), ref_w, local[0].gamma0);
}

} // namespace

CouplingMatrix coupling_matrix(std::span<const Atom> atoms,
                               const GreenProvider& green)
{
  return matrix_impl(atoms, nullptr, green);
}

CouplingMatrix coupling_matrix_at(std::span<const Atom> atoms, double omega,
                                  const GreenProvider& green)
{
  if (!(omega > 0.0))
    throw DomainError("coupling_matrix_at: frequency must be positive");
  return matrix_impl(atoms, &omega, green);
}

double dipole_dipole_shift(const Atom& a, const Atom& ap,
                           const GreenProvider& green)
{
  if (&a == &ap)
    throw DomainError("dipole_dipole_shift: requires two distinct atoms");
  a.validate();
  ap.validate();
  const double w = ap.omega_shifted;
  const Vec3 p[2] = {a.position, ap.position};
  if ((a.position - ap.position).norm() == 0.0)
    throw DomainError("dipole_dipole_shift: atoms at the same position");
  const GreenBlock t = green.evaluate(p, w);
  return (coupling_scale(a, ap, w) * pair_value(a, ap, real_part(t(0, 1)))).real();
}

std::vector<cdouble> pair_rate_spectrum(const Atom& a, const Atom& ap,
                                        bool same_atom,
                                        std::span<const double> grid,
                                        const GreenProvider& green,
                                        GreenPart part)
{
  a.validate();
  ap.validate();
  std::vector<cdouble> out(grid.size());
  std::vector<Vec3> pts{a.position};
  if (!same_atom)
    pts.push_back(ap.position);
  const int col = same_atom ? 0 : 1;
  parallel_for(grid.size(), 0, [&](std::size_t i) {
    const double w = grid[i];
    const GreenBlock b = part == GreenPart::total ? green.evaluate(pts, w)
                                                  : green.evaluate_scattering(pts, w);
    out[i] = 2.0 * coupling_scale(a, ap, w) * pair_value(a, ap, imag_part(b(0, col)));
  });
  return out;
}

double pv_shift_from_spectrum(std::span<const double> grid,
                              std::span<const cdouble> rate, double pole,
                              int sign)
{
  if (sign != 1 && sign != -1)
    throw DomainError("pv_shift: sign must be +1 or -1");
  if (grid.empty() || grid.front() < 0.0)
    throw DomainError("pv_shift: grid must start at or above zero");
  const cdouble v = sign < 0 ? pv_integral_linear(grid, rate, pole)
                             : integral_over_pole(grid, rate, -pole);
  return v.real() / (2.0 * pi);
}

double pv_shift_pair(const Atom& a, const Atom& ap, bool same_atom, int sign,
                     const GreenProvider& green, std::span<const double> grid,
                     GreenPart part)
{
  if (sign != 1 && sign != -1)
    throw DomainError("pv_shift_pair: sign must be +1 or -1");
  const std::vector<cdouble> rate = pair_rate_spectrum(a, ap, same_atom, grid, green, part);
  return pv_shift_from_spectrum(grid, rate, ap.omega_shifted, sign);
}

double shifted_frequency(const Atom& a, const GreenProvider& green,
                         std::span<const double> grid,
                         bool include_counter_rotating, int iterations)
{
  a.validate();
  if (iterations < 1)
    throw DomainError("shifted_frequency: iterations must be >= 1");
  Atom cur = a;
  cur.omega_shifted = a.omega_bare;
  for (int it = 0; it < iterations; ++it) {
    const double w = cur.omega_shifted;
    const Vec3 p[1] = {cur.position};
    const GreenBlock r = green.evaluate_scattering(p, w);
    double delta = (coupling_scale(cur, cur, w) * pair_value(cur, cur, real_part(r(0, 0)))).real();
    if (include_counter_rotating)
      delta -= 2.0 * pv_shift_pair(cur, cur, true, +1, green, grid, GreenPart::scattering);
    cur.omega_shifted = a.omega_bare - delta;
    if (!(cur.omega_shifted > 0.0))
      throw DomainError("shifted_frequency: shift exceeds the bare frequency");
  }
  return cur.omega_shifted;
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& f)
{
  unsigned hw = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (hw == 0)
    hw = 1;
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back(work);
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

CouplingSpectrum sweep_spectrum(std::span<const Atom> atoms,
                                std::span<const double> grid,
                                const GreenProvider& green, unsigned threads)
{
  if (grid.size() > 1) {
    const bool up = grid[1] > grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1]))
        throw DomainError("sweep_spectrum: grid must be strictly monotone");
  }
  CouplingSpectrum s;
  s.omega.assign(grid.begin(), grid.end());
  s.matrices.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    s.matrices[i] = coupling_matrix_at(atoms, grid[i], green);
  });
  return s;
}

} // namespace dipolium
