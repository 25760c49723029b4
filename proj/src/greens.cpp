#include "dipolium/greens.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dipolium/error.hpp"
#include "dipolium/special.hpp"
#include "multipole.hpp"

namespace dipolium {

namespace {

// e^{ix}(1 + i/x - 1/x^2) and e^{ix}(-1 - 3i/x + 3/x^2). Below |x| = 0.1 the
// Taylor series of x^2 * (...) avoids the cancellation in the imaginary parts.
void dyad_factors(double x, cdouble& a, cdouble& b)
{
  if (x >= 0.1) {
    const cdouble e = std::exp(I * x);
    const cdouble ix = I / x;
    const double ix2 = 1.0 / (x * x);
    a = e * (1.0 + ix - ix2);
    b = e * (-1.0 - 3.0 * ix + 3.0 * ix2);
    return;
  }
  // Coefficient of x^p: i^p [-1/(p-2)! + 1/(p-1)! - 1/p!] for a,
  // i^p [1/(p-2)! - 3/(p-1)! + 3/p!] for b.
  cdouble sa = 0.0, sb = 0.0;
  cdouble ip = 1.0;
  double inv_fact[24];
  inv_fact[0] = 1.0;
  for (int i = 1; i < 24; ++i)
    inv_fact[i] = inv_fact[i - 1] / i;
  double xp = 1.0;
  for (int p = 0; p < 22; ++p) {
    const double f2 = p >= 2 ? inv_fact[p - 2] : 0.0;
    const double f1 = p >= 1 ? inv_fact[p - 1] : 0.0;
    const double f0 = inv_fact[p];
    sa += ip * (-f2 + f1 - f0) * xp;
    sb += ip * (f2 - 3.0 * f1 + 3.0 * f0) * xp;
    ip *= I;
    xp *= x;
  }
  a = sa / (x * x);
  b = sb / (x * x);
}

void require_exterior(const Vec3& p, double radius, const char* who)
{
  if (!(p.norm() > radius))
    throw DomainError(std::string(who) + ": point inside or on the sphere");
}

void require_frequency(double omega, const char* who)
{
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw DomainError(std::string(who) + ": frequency must be positive");
}

} // namespace

DyadicGreenValue free_space_green(const Vec3& r, const Vec3& rp, double omega)
{
  require_frequency(omega, "free_space_green");
  const Vec3 d = r - rp;
  const double dist = d.norm();
  if (!(dist > 0.0))
    throw DomainError("free_space_green: r == r'; use imag_green_coincidence_free");
  const double k = wave_number(omega);
  cdouble a, b;
  dyad_factors(k * dist, a, b);
  const Vec3 u = d / dist;
  const Eigen::Matrix3d uu = u * u.transpose();
  const Tensor3 g = a * Tensor3::Identity() + b * uu.cast<cdouble>();
  return g / (4.0 * pi * dist);
}

DyadicGreenValue imag_green_coincidence_free(double omega)
{
  require_frequency(omega, "imag_green_coincidence_free");
  return Tensor3::Identity() * cdouble(0.0, wave_number(omega) / (6.0 * pi));
}

void SphereGeometry::validate() const
{
  if (!(diameter > 0.0) || !std::isfinite(diameter))
    throw DomainError("sphere diameter must be positive");
  material.validate();
}

Vec3 point_above_surface(double radius, double delta_r, double theta, double phi)
{
  const double r = radius + delta_r;
  return r * Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                  std::cos(theta));
}

// ---------------------------------------------------------------------------
// Angular algebra

namespace detail {

PairFrame pair_frame(const Vec3& r, const Vec3& rp)
{
  PairFrame f;
  const Vec3 ez = r.normalized();
  const Vec3 up = rp.normalized();
  Vec3 v = up - up.dot(ez) * ez;
  const double vn = v.norm();
  Vec3 ex;
  if (vn > 1e-14) {
    ex = v / vn;
  } else {
    // Collinear points: any axis perpendicular to r.
    Eigen::Index i;
    ez.cwiseAbs().minCoeff(&i);
    Vec3 trial = Vec3::Zero();
    trial[i] = 1.0;
    ex = (trial - trial.dot(ez) * ez).normalized();
  }
  const Vec3 ey = ez.cross(ex);
  f.axes.col(0) = ex;
  f.axes.col(1) = ey;
  f.axes.col(2) = ez;
  const double s = ez.cross(up).norm();
  const double c = ez.dot(up);
  const double th = std::atan2(s, c);
  f.cos_theta = std::cos(th);
  f.sin_theta = std::sin(th);
  return f;
}

Tensor3 to_global(const PairFrame& frame, const Tensor3& g)
{
  const Tensor3 q = frame.axes.cast<cdouble>();
  return q * g * q.transpose();
}

MultipoleSum multipole_sum_frame(double k, const std::vector<cdouble>& coef_n,
                                 const std::vector<cdouble>& coef_m,
                                 const RadialSet& p1, const RadialSet& p2,
                                 const PairFrame& frame, int n_max)
{
  const double c = frame.cos_theta;
  const double s = frame.sin_theta;
  const LegendreTable leg = legendre_table(n_max, c);

  // Only five frame entries are non-zero: (x,x), (x,z), (y,y), (z,x), (z,z).
  cdouble xx = 0.0, xz = 0.0, yy = 0.0, zx = 0.0, zz = 0.0;
  std::vector<double> norms(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int n = 1; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const double nn = static_cast<double>(n) * (n + 1);
    const double pref = (2.0 * n + 1.0) / nn;
    const double p = leg.p[i];
    const double dp = leg.dp[i];
    const double dp1_dth = nn * p - c * dp; // d P_n^1 / d theta
    const double pn1 = s * dp;              // P_n^1
    const double p1_s = dp;                 // P_n^1 / sin theta
    const double dp_dth = -s * dp;          // d P_n / d theta

    const cdouble cn = pref * coef_n[i];
    const cdouble cm = pref * coef_m[i];
    // TM, m = 0: radial at r, (r', theta') components at r'.
    const cdouble rad_r = cn * p1.z_rho[i] * nn * nn * p2.z_rho[i] * p;
    const cdouble rad_t = cn * p1.z_rho[i] * nn * p2.dz[i] * dp_dth;
    // TE and TM, m = 1.
    const cdouble te_t = cm * p1.z[i] * p2.z[i] * p1_s;
    const cdouble te_p = cm * p1.z[i] * p2.z[i] * dp1_dth;
    const cdouble tm_r = cn * p1.dz[i] * nn * p2.z_rho[i] * pn1;
    const cdouble tm_t = cn * p1.dz[i] * p2.dz[i] * dp1_dth;
    const cdouble tm_p = cn * p1.dz[i] * p2.dz[i] * p1_s;

    // r' = (s, 0, c), theta' = (c, 0, -s), phi' = (0, 1, 0) in the frame.
    const cdouble txx = tm_r * s + (te_t + tm_t) * c;
    const cdouble txz = tm_r * c - (te_t + tm_t) * s;
    const cdouble tyy = te_p + tm_p;
    const cdouble tzx = rad_r * s + rad_t * c;
    const cdouble tzz = rad_r * c - rad_t * s;
    xx += txx;
    xz += txz;
    yy += tyy;
    zx += tzx;
    zz += tzz;
    norms[i] = std::sqrt(std::norm(txx) + std::norm(txz) + std::norm(tyy) +
                         std::norm(tzx) + std::norm(tzz));
  }
  Tensor3 sum = Tensor3::Zero();
  sum(0, 0) = xx;
  sum(0, 2) = xz;
  sum(1, 1) = yy;
  sum(2, 0) = zx;
  sum(2, 2) = zz;

  MultipoleSum out;
  const cdouble scale = I * k / (4.0 * pi);
  out.value = scale * sum;
  const double total = sum.norm();
  double tail = 0.0;
  const int span = std::clamp(n_max / 4, 1, 10);
  for (int n = std::max(1, n_max - span + 1); n <= n_max; ++n)
    tail = std::max(tail, norms[static_cast<std::size_t>(n)]);
  out.tail = total > 0.0 ? tail / total : 0.0;
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Sphere

namespace {

struct MieCore
{
  std::vector<cdouble> beta_m, beta_n, raw_m, raw_n;
  ScaledSequence xi_a;
};

MieCore mie_core(const SphereGeometry& geometry, double omega, int n_max)
{
  MieCore core;
  const double k = wave_number(omega);
  const double x = k * geometry.radius();
  const cdouble m = std::sqrt(permittivity(geometry.material, omega));
  const ScaledSequence psi = riccati_psi(n_max, x);
  core.xi_a = riccati_xi(n_max, x);
  const std::vector<cdouble> d = riccati_log_derivative(n_max, m * x);

  const auto size = static_cast<std::size_t>(n_max) + 1;
  core.beta_m.assign(size, 0.0);
  core.beta_n.assign(size, 0.0);
  core.raw_m.assign(size, 0.0);
  core.raw_n.assign(size, 0.0);
  double last_prod = 0.0, exp_prod = 1.0, last_quot = 0.0, exp_quot = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const cdouble rpsi = psi.ratio_down(n);
    const cdouble rxi = core.xi_a.ratio_down(n);
    const double nx = n / x;
    const cdouble an_ = d[i] / m + nx;
    const cdouble bm_ = m * d[i] + nx;
    const cdouble a_ratio = (an_ - rpsi) / (an_ - rxi);
    const cdouble b_ratio = (bm_ - rpsi) / (bm_ - rxi);
    // psi_n xi_n and psi_n / xi_n from the scaled forms.
    const double log_prod = psi.log_scale[i] + core.xi_a.log_scale[i];
    const double log_quot = psi.log_scale[i] - core.xi_a.log_scale[i];
    if (log_prod != last_prod) {
      last_prod = log_prod;
      exp_prod = std::exp(log_prod);
    }
    if (log_quot != last_quot) {
      last_quot = log_quot;
      exp_quot = std::exp(log_quot);
    }
    const cdouble prod = psi.mantissa[i] * core.xi_a.mantissa[i] * exp_prod;
    const cdouble quot = psi.mantissa[i] / core.xi_a.mantissa[i] * exp_quot;
    core.beta_n[i] = -a_ratio * prod;
    core.beta_m[i] = -b_ratio * prod;
    core.raw_n[i] = -a_ratio * quot;
    core.raw_m[i] = -b_ratio * quot;
  }
  return core;
}

// xi_{n-1}(x) / xi_n(x), n = 1..n_max, by the upward recurrence (entry 0
// is 1 / xi_0(x)).
std::vector<cdouble> xi_inverse_ratios(double x, int n_max)
{
  std::vector<cdouble> v(static_cast<std::size_t>(n_max) + 1);
  const cdouble e = std::exp(I * x);
  const cdouble xi0 = -I * e;
  v[0] = 1.0 / xi0;
  if (n_max >= 1)
    v[1] = xi0 / (-e * (x + I) / x);
  for (int n = 1; n < n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    v[i + 1] = 1.0 / (static_cast<double>(2 * n + 1) / x - v[i]);
  }
  return v;
}

// Radial set for an exterior point with the factor 1/xi_n(ka) absorbed, so
// that beta_n = B_n xi_n(ka)^2 multiplies well-scaled numbers. The ratio
// T_n = xi_n(rho)/xi_n(ka) decays geometrically beyond n ~ rho and may
// underflow harmlessly. `inv_a` holds xi_{n-1}(ka)/xi_n(ka).
detail::RadialSet exterior_radial(double rho, const std::vector<cdouble>& inv_a,
                                  int n_max)
{
  const std::vector<cdouble> inv = xi_inverse_ratios(rho, n_max);
  detail::RadialSet rs;
  const auto size = static_cast<std::size_t>(n_max) + 1;
  rs.z.assign(size, 0.0);
  rs.z_rho.assign(size, 0.0);
  rs.dz.assign(size, 0.0);
  const double ir = 1.0 / rho;
  cdouble t = inv_a[0] / inv[0];
  for (int n = 1; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    t *= inv_a[i] / inv[i];
    const cdouble logd = inv[i] - static_cast<double>(n) * ir;
    rs.z[i] = t * ir;
    rs.z_rho[i] = t * (ir * ir);
    rs.dz[i] = t * logd * ir;
  }
  return rs;
}

} // namespace

MieCoefficients mie_reflection_coefficients(int n, double omega,
                                            const SphereGeometry& geometry)
{
  if (n < 1)
    throw DomainError("mie_reflection_coefficients: order must be >= 1");
  require_frequency(omega, "mie_reflection_coefficients");
  geometry.validate();
  if (geometry.material.is_vacuum())
    return {0.0, 0.0};
  const MieCore core = mie_core(geometry, omega, n);
  const auto i = static_cast<std::size_t>(n);
  return {core.raw_m[i], core.raw_n[i]};
}

SphereScatteringSeries::SphereScatteringSeries(const SphereGeometry& geometry,
                                               double omega, int n_max)
    : geometry_(geometry), omega_(omega), n_max_(n_max),
      vacuum_(geometry.material.is_vacuum())
{
  geometry_.validate();
  require_frequency(omega, "SphereScatteringSeries");
  if (n_max < 1)
    throw DomainError("SphereScatteringSeries: n_max must be >= 1");
  if (vacuum_)
    return;
  MieCore core = mie_core(geometry_, omega_, n_max_);
  beta_m_ = std::move(core.beta_m);
  beta_n_ = std::move(core.beta_n);
  raw_m_ = std::move(core.raw_m);
  raw_n_ = std::move(core.raw_n);
  xi_a_ratio_ = xi_inverse_ratios(wave_number(omega_) * geometry_.radius(), n_max_);
}

MieCoefficients SphereScatteringSeries::coefficients(int n) const
{
  if (n < 1 || n > n_max_)
    throw DomainError("SphereScatteringSeries::coefficients: order out of range");
  if (vacuum_)
    return {0.0, 0.0};
  const auto i = static_cast<std::size_t>(n);
  return {raw_m_[i], raw_n_[i]};
}

SphereScatteringSeries::Sum SphereScatteringSeries::sum(const Vec3& r,
                                                        const Vec3& rp) const
{
  const double a = geometry_.radius();
  require_exterior(r, a, "sphere_scattering_green");
  require_exterior(rp, a, "sphere_scattering_green");
  Sum out;
  out.value = Tensor3::Zero();
  if (vacuum_)
    return out;
  const double k = wave_number(omega_);
  const detail::PairFrame frame = detail::pair_frame(r, rp);
  const detail::RadialSet p1 =
      exterior_radial(k * r.norm(), xi_a_ratio_, n_max_);
  const bool same_radius = r.norm() == rp.norm();
  const detail::RadialSet p2 =
      same_radius ? p1 : exterior_radial(k * rp.norm(), xi_a_ratio_, n_max_);
  const detail::MultipoleSum ms =
      detail::multipole_sum_frame(k, beta_n_, beta_m_, p1, p2, frame, n_max_);
  out.value = detail::to_global(frame, ms.value);
  out.tail = ms.tail;
  return out;
}

std::vector<SphereScatteringSeries::Sum>
SphereScatteringSeries::sum_pairs(std::span<const Vec3> points) const
{
  const double a = geometry_.radius();
  for (const Vec3& p : points)
    require_exterior(p, a, "sphere_scattering_green");
  const std::size_t n = points.size();
  std::vector<Sum> out;
  out.reserve(n * (n + 1) / 2);
  if (vacuum_) {
    out.assign(n * (n + 1) / 2, Sum{Tensor3::Zero(), 0.0});
    return out;
  }
  const double k = wave_number(omega_);
  std::vector<double> radii;
  std::vector<detail::RadialSet> sets;
  std::vector<std::size_t> which(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = points[i].norm();
    const auto it = std::find(radii.begin(), radii.end(), r);
    if (it == radii.end()) {
      which[i] = radii.size();
      radii.push_back(r);
      sets.push_back(exterior_radial(k * r, xi_a_ratio_, n_max_));
    } else {
      which[i] = static_cast<std::size_t>(it - radii.begin());
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const detail::PairFrame frame = detail::pair_frame(points[i], points[j]);
      const detail::MultipoleSum ms = detail::multipole_sum_frame(
          k, beta_n_, beta_m_, sets[which[i]], sets[which[j]], frame, n_max_);
      out.push_back({detail::to_global(frame, ms.value), ms.tail});
    }
  return out;
}

DyadicGreenValue SphereScatteringSeries::green(const Vec3& r, const Vec3& rp,
                                               double tolerance) const
{
  const Sum s = sum(r, rp);
  if (s.tail > tolerance)
    throw ConvergenceError("sphere Green series not converged at n_max = " +
                               std::to_string(n_max_) + " (tail " +
                               std::to_string(s.tail) + ")",
                           s.tail);
  return s.value;
}

int auto_multipole_order(const SphereGeometry& geometry, double omega, double r,
                         double rp, double tolerance)
{
  const double a = geometry.radius();
  if (!(r > a) || !(rp > a))
    throw DomainError("auto_multipole_order: point inside or on the sphere");
  if (!(tolerance > 0.0 && tolerance < 1.0))
    throw DomainError("auto_multipole_order: tolerance must lie in (0, 1)");
  const double x = wave_number(omega) * a;
  const double wiscombe = std::ceil(x + 4.0 * std::cbrt(x) + 10.0);
  // Beyond n ~ ka the terms fall off like (a^2 / r r')^n n^2.
  const double decay = std::log(r * rp / (a * a));
  const double target = std::log(10.0 / tolerance);
  double extra = target / decay;
  for (int it = 0; it < 8; ++it)
    extra = (target + 2.0 * std::log(x + extra + 1.0)) / decay;
  const double n = std::max(wiscombe, std::ceil(x + extra));
  constexpr double limit = 400000.0;
  if (n > limit)
    throw ConvergenceError("auto_multipole_order: points too close to the surface "
                           "(needs ~" + std::to_string(static_cast<long>(n)) +
                               " multipoles)",
                           n);
  return static_cast<int>(n);
}

DyadicGreenValue sphere_scattering_green(const Vec3& r, const Vec3& rp,
                                         double omega,
                                         const SphereGeometry& geometry,
                                         const SeriesControl& control)
{
  geometry.validate();
  require_frequency(omega, "sphere_scattering_green");
  require_exterior(r, geometry.radius(), "sphere_scattering_green");
  require_exterior(rp, geometry.radius(), "sphere_scattering_green");
  if (geometry.material.is_vacuum())
    return Tensor3::Zero();
  const int n = control.n_max > 0
                    ? control.n_max
                    : auto_multipole_order(geometry, omega, r.norm(), rp.norm(),
                                           control.tolerance);
  return SphereScatteringSeries(geometry, omega, n).green(r, rp, control.tolerance);
}

// ---------------------------------------------------------------------------
// Providers

GreenBlock FreeSpaceProvider::evaluate(std::span<const Vec3> points,
                                       double omega) const
{
  GreenBlock b;
  b.size = static_cast<int>(points.size());
  b.entries.resize(points.size() * points.size());
  for (int i = 0; i < b.size; ++i)
    for (int j = 0; j < b.size; ++j)
      b(i, j) = i == j ? imag_green_coincidence_free(omega)
                       : free_space_green(points[static_cast<std::size_t>(i)],
                                          points[static_cast<std::size_t>(j)], omega);
  return b;
}

GreenBlock FreeSpaceProvider::evaluate_scattering(std::span<const Vec3> points,
                                                  double omega) const
{
  require_frequency(omega, "FreeSpaceProvider");
  GreenBlock b;
  b.size = static_cast<int>(points.size());
  b.entries.assign(points.size() * points.size(), Tensor3::Zero());
  return b;
}

SphereProvider::SphereProvider(SphereGeometry geometry, SeriesControl control)
    : geometry_(geometry), control_(control)
{
  geometry_.validate();
  if (control_.n_max < 0 || !(control_.tolerance > 0.0))
    throw DomainError("SphereProvider: invalid series control");
}

namespace {

GreenBlock sphere_block(const SphereGeometry& geometry,
                        const SeriesControl& control,
                        std::span<const Vec3> points, double omega,
                        bool with_vacuum)
{
  require_frequency(omega, "SphereProvider");
  const double a = geometry.radius();
  for (const Vec3& p : points)
    require_exterior(p, a, "SphereProvider");
  const int n = static_cast<int>(points.size());

  GreenBlock b;
  b.size = n;
  b.entries.assign(points.size() * points.size(), Tensor3::Zero());

  if (!geometry.material.is_vacuum() && n > 0) {
    int order = control.n_max;
    if (order == 0)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          order = std::max(order, auto_multipole_order(
                                      geometry, omega, points[static_cast<std::size_t>(i)].norm(),
                                      points[static_cast<std::size_t>(j)].norm(),
                                      control.tolerance));
    const SphereScatteringSeries series(geometry, omega, order);
    const auto sums = series.sum_pairs(points);
    std::size_t q = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++q) {
        if (sums[q].tail > control.tolerance)
          throw ConvergenceError("sphere Green series not converged at n_max = " +
                                     std::to_string(order) + " (tail " +
                                     std::to_string(sums[q].tail) + ")",
                                 sums[q].tail);
        b(i, j) = sums[q].value;
        if (i != j)
          b(j, i) = sums[q].value.transpose();
      }
  }
  if (with_vacuum) {
    const FreeSpaceProvider vac;
    const GreenBlock v = vac.evaluate(points, omega);
    for (std::size_t e = 0; e < b.entries.size(); ++e)
      b.entries[e] += v.entries[e];
  }
  return b;
}

} // namespace

GreenBlock SphereProvider::evaluate(std::span<const Vec3> points,
                                    double omega) const
{
  return sphere_block(geometry_, control_, points, omega, true);
}

GreenBlock SphereProvider::evaluate_scattering(std::span<const Vec3> points,
                                               double omega) const
{
  return sphere_block(geometry_, control_, points, omega, false);
}

} // namespace dipolium
