#include <doctest.h>

#include <random>

#include "../src/multipole.hpp"
#include "dipolium/error.hpp"
#include "dipolium/greens.hpp"
#include "dipolium/special.hpp"
#include "oracles.hpp"

using namespace dipolium;

namespace {

double rel(const Tensor3& a, const Tensor3& b)
{
  return (a - b).norm() / b.norm();
}

SphereGeometry small_sphere(double diameter, double gamma)
{
  SphereGeometry g;
  g.diameter = diameter;
  g.material = DrudeLorentz{1.0, 0.5, gamma};
  return g;
}

Eigen::Matrix3d rotation(double a, double b, double c)
{
  return (Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
          Eigen::AngleAxisd(c, Vec3::UnitZ()))
      .toRotationMatrix();
}

} // namespace

TEST_CASE("free-space dyad")
{
  const Vec3 r(0.3, -0.2, 0.9);
  const Vec3 rp(-0.1, 0.4, 0.2);
  for (double w : {0.01, 0.5, 1.05, 7.0})
    CHECK(rel(free_space_green(r, rp, w), oracle::vacuum_dyad(r, rp, w)) < 1e-12);
  CHECK_THROWS_AS(free_space_green(r, r, 1.0), DomainError);
}

TEST_CASE("free-space dyad is symmetric and reciprocal")
{
  const Vec3 r(0.3, -0.2, 0.9);
  const Vec3 rp(-0.1, 0.4, 0.2);
  const Tensor3 g = free_space_green(r, rp, 1.0);
  CHECK((g - g.transpose()).norm() < 1e-14 * g.norm());
  CHECK((g - free_space_green(rp, r, 1.0)).norm() < 1e-14 * g.norm());
}

TEST_CASE("coincidence limit of Im G_V")
{
  const double w = 1.05;
  const double k = wave_number(w);
  const Tensor3 lim = imag_green_coincidence_free(w);
  CHECK(lim.real().norm() == 0.0);
  CHECK((lim.imag() - k / (6 * pi) * Eigen::Matrix3d::Identity()).norm() < 1e-15);
  const Vec3 r(0.1, 0.2, 0.3);
  const Tensor3 near = free_space_green(r, r + Vec3(1e-5, -2e-5, 0.5e-5), w);
  CHECK((near.imag() - lim.imag()).norm() < 1e-8 * lim.imag().norm());
}

TEST_CASE("vector spherical wave expansion reproduces the vacuum dyad")
{
  const double w = 1.0;
  const double k = wave_number(w);
  const Vec3 r(0.3, -0.7, 1.9);
  const Vec3 rp(0.2, 0.5, -0.4);
  const int nmax = 60;
  const double rho = k * r.norm();
  const double rhop = k * rp.norm();
  const auto h = spherical_bessel_h_sequence(nmax + 1, rho);
  const auto j = spherical_bessel_j_sequence(nmax + 1, rhop);
  detail::RadialSet p1;
  detail::RadialSet p2;
  for (auto* p : {&p1, &p2}) {
    p->z.assign(nmax + 1, 0.0);
    p->z_rho.assign(nmax + 1, 0.0);
    p->dz.assign(nmax + 1, 0.0);
  }
  for (int n = 1; n <= nmax; ++n) {
    const auto u = static_cast<std::size_t>(n);
    p1.z[u] = h[u];
    p1.z_rho[u] = h[u] / rho;
    p1.dz[u] = (rho * h[u - 1] - double(n) * h[u]) / rho;
    p2.z[u] = j[u];
    p2.z_rho[u] = j[u] / rhop;
    p2.dz[u] = (rhop * j[u - 1] - double(n) * j[u]) / rhop;
  }
  const std::vector<cdouble> one(nmax + 1, 1.0);
  const auto frame = detail::pair_frame(r, rp);
  const auto s = detail::multipole_sum_frame(k, one, one, p1, p2, frame, nmax);
  // The expansion omits the delta-like longitudinal part, which vanishes
  // for distinct points.
  CHECK(rel(detail::to_global(frame, s.value), oracle::vacuum_dyad(r, rp, w)) < 1e-12);
}

TEST_CASE("reflection coefficients are minus the textbook Mie coefficients")
{
  const SphereGeometry g = small_sphere(0.6, 0.05);
  for (double w : {0.8, 0.97, 1.3}) {
    const cdouble m = std::sqrt(permittivity(g.material, w));
    const double x = wave_number(w) * g.radius();
    for (int n = 1; n <= 3; ++n) {
      const oracle::Mie ref = oracle::mie(n, m, x);
      const MieCoefficients c = mie_reflection_coefficients(n, w, g);
      CHECK(std::abs(c.b_n + ref.a) < 1e-9 * std::max(1e-3, std::abs(ref.a)));
      CHECK(std::abs(c.b_m + ref.b) < 1e-9 * std::max(1e-3, std::abs(ref.b)));
    }
  }
}

TEST_CASE("small sphere scatters like a point dipole")
{
  // G_R(r, r') -> k^2 G_V(r, 0) alpha G_V(0, r'), alpha = 4 pi a^3 (eps-1)/(eps+2)
  const SphereGeometry g = small_sphere(0.01, 0.05);
  const double w = 0.9;
  const double k = wave_number(w);
  const cdouble eps = permittivity(g.material, w);
  const double a = g.radius();
  const cdouble alpha = 4 * pi * a * a * a * (eps - 1.0) / (eps + 2.0);
  const Vec3 r(0.05, 0.25, 0.2);
  const Vec3 rp(-0.3, 0.1, -0.15);
  const Tensor3 ref = k * k * alpha * oracle::vacuum_dyad(r, Vec3::Zero(), w) *
                      oracle::vacuum_dyad(Vec3::Zero(), rp, w);
  const Tensor3 gr = sphere_scattering_green(r, rp, w, g);
  CHECK(rel(gr, ref) < 5e-3);
}

TEST_CASE("sphere Green tensor is reciprocal and rotation covariant")
{
  const SphereGeometry g;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Vec3 da(u(rng), u(rng), u(rng));
    Vec3 db(u(rng), u(rng), u(rng));
    const Vec3 r = da.normalized() * (10.05 + 0.1 * std::abs(u(rng)));
    const Vec3 rp = db.normalized() * (10.05 + 0.1 * std::abs(u(rng)));
    const double w = 1.0504 + 1e-4 * u(rng);
    const Tensor3 g1 = sphere_scattering_green(r, rp, w, g);
    const Tensor3 g2 = sphere_scattering_green(rp, r, w, g);
    CHECK((g1 - g2.transpose()).norm() < 1e-8 * g1.norm());
    const Eigen::Matrix3d q = rotation(u(rng), u(rng), u(rng));
    const Tensor3 g3 = sphere_scattering_green(q * r, q * rp, w, g);
    const Tensor3 rot = q.cast<cdouble>() * g1 * q.transpose().cast<cdouble>();
    CHECK((g3 - rot).norm() < 1e-8 * g1.norm());
  }
}

TEST_CASE("series order is sufficient: a longer series does not change the value")
{
  const SphereGeometry g;
  const Vec3 r = point_above_surface(10.0, 0.02, 0.3, 0.1);
  const Vec3 rp = point_above_surface(10.0, 0.03, 2.0, 1.0);
  const double w = 1.0504867;
  const int n = auto_multipole_order(g, w, r.norm(), rp.norm(), 1e-10);
  const SphereScatteringSeries auto_series(g, w, n);
  const SphereScatteringSeries long_series(g, w, n + n / 2);
  const Tensor3 a = auto_series.green(r, rp);
  const Tensor3 b = long_series.green(r, rp);
  CHECK(rel(a, b) < 1e-9);
}

TEST_CASE("absorbing sphere: Im of the coincident tensor is positive definite")
{
  const SphereProvider provider{SphereGeometry{}};
  for (double w : {1.03, 1.0504862, 1.0504867, 1.06}) {
    const std::vector<Vec3> pts{point_above_surface(10.0, 0.02, 0.4, 0.0)};
    const GreenBlock b = provider.evaluate(pts, w);
    const Eigen::Matrix3d im = b(0, 0).imag();
    const Eigen::Matrix3d sym = 0.5 * (im + im.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sym);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("vacuum sphere has no scattering part")
{
  SphereGeometry g;
  g.material.omega_P = 0.0;
  const Vec3 r = point_above_surface(10.0, 0.02, 0.0, 0.0);
  const Vec3 rp = point_above_surface(10.0, 0.02, 1.0, 0.0);
  CHECK(sphere_scattering_green(r, rp, 1.05, g).norm() == 0.0);
}

TEST_CASE("sphere Green tensor errors")
{
  const SphereGeometry g;
  CHECK_THROWS_AS(sphere_scattering_green(Vec3(0, 0, 5), Vec3(0, 0, 11), 1.05, g), DomainError);
  const Vec3 r = point_above_surface(10.0, 0.02, 0.0, 0.0);
  const Vec3 rp = point_above_surface(10.0, 0.02, 0.5, 0.0);
  CHECK_THROWS_AS(sphere_scattering_green(r, rp, 1.05, g, SeriesControl{20, 1e-10}),
                  ConvergenceError);
}

TEST_CASE("provider block is consistent with the pairwise functions")
{
  const SphereGeometry g;
  const SphereProvider provider{g};
  const std::vector<Vec3> pts{point_above_surface(10.0, 0.02, 0.0, 0.0),
                              point_above_surface(10.0, 0.03, 0.7, 0.4),
                              point_above_surface(10.0, 0.02, 2.9, 0.0)};
  const double w = 1.05048;
  const GreenBlock full = provider.evaluate(pts, w);
  const GreenBlock refl = provider.evaluate_scattering(pts, w);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      const Tensor3 gr = sphere_scattering_green(pts[ui], pts[uj], w, g);
      CHECK(rel(refl(i, j), gr) < 1e-10);
      if (i != j)
        CHECK(rel(full(i, j), gr + free_space_green(pts[ui], pts[uj], w)) < 1e-10);
      else
        CHECK((full(i, j).imag() - gr.imag() - imag_green_coincidence_free(w).imag()).norm() <
              1e-10 * full(i, j).norm());
    }
}
