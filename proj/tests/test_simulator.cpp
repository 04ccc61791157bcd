#include "iconik/error.hpp"
#include "iconik/nufft.hpp"
#include "iconik/parallel.hpp"
#include "iconik/simulator.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace iconik;

namespace {

Ellipse disk(double r, double cx = 0.0, double cy = 0.0)
{
  Ellipse e;
  e.a = e.b = r;
  e.cx = cx;
  e.cy = cy;
  return e;
}

double total_abs(ComplexImage const &img)
{
  double s = 0.0;
  for (auto const &v : img) { s += std::abs(v); }
  return s;
}

// centroid row of |img|
double centroid_y(ComplexImage const &img)
{
  double s = 0.0, sy = 0.0;
  for (std::size_t y = 0; y < img.rows(); ++y) {
    for (std::size_t x = 0; x < img.cols(); ++x) {
      s += std::abs(img(y, x));
      sy += y * std::abs(img(y, x));
    }
  }
  return sy / s;
}

// continuous transform by brute-force summation over a fine raster
cdouble dense_fourier(Ellipse const &e, double fx, double fy, int n)
{
  EllipsePhantom p{{e}};
  auto const img = phantom_image(p, 0.0, n, n);
  double const h = 2.0 / n;
  cdouble acc = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (img(y, x) == 0.0) { continue; }
      double const ux = (x - n / 2) * h, uy = (y - n / 2) * h;
      acc += img(y, x) * std::polar(1.0, -2.0 * std::numbers::pi * (fx * ux + fy * uy));
    }
  }
  return acc * h * h;
}

} // namespace

TEST_CASE("phantom rasterization", "[simulator]")
{
  SECTION("empty phantom")
  {
    auto const img = phantom_image({}, 0.3, 16, 16);
    REQUIRE(total_abs(img) == 0.0);
  }
  SECTION("translation moves the centroid by m_t * nav * H / 2 pixels")
  {
    Ellipse e = disk(0.25);
    e.m_t = 0.2;
    EllipsePhantom p{{e}};
    auto const a = phantom_image(p, 0.0, 64, 64), b = phantom_image(p, 1.0, 64, 64);
    REQUIRE(centroid_y(b) - centroid_y(a) == Catch::Approx(0.2 * 32).margin(0.1));
    REQUIRE(total_abs(b) == Catch::Approx(total_abs(a)).epsilon(0.01));
  }
  SECTION("overlapping amplitudes add")
  {
    EllipsePhantom p{{disk(0.5), disk(0.2)}};
    auto const img = phantom_image(p, 0.0, 32, 32);
    REQUIRE(img(16, 16).real() == Catch::Approx(2.0));
    REQUIRE(img(16, 22).real() == Catch::Approx(1.0));
  }
  SECTION("small images are rejected")
  {
    REQUIRE_THROWS_AS(phantom_image({}, 0.0, 4, 16), ConfigError);
  }
}

TEST_CASE("phantom validation", "[simulator]")
{
  REQUIRE_NOTHROW(EllipsePhantom::abdomen().validate());
  Ellipse e = disk(0.3, 0.0, 0.6);
  e.m_t = 0.2;
  REQUIRE_THROWS_AS(EllipsePhantom{{e}}.validate(), ConfigError);
  REQUIRE_THROWS_AS(EllipsePhantom{{disk(-0.1)}}.validate(), ConfigError);
}

TEST_CASE("analytic ellipse transform", "[simulator]")
{
  SECTION("DC equals the area")
  {
    Ellipse e = disk(0.3);
    e.b = 0.2;
    e.amplitude = {2.0, 0.5};
    cdouble const v = ellipse_fourier(e, 0.0, 0.0, 0.0);
    REQUIRE(std::abs(v - e.amplitude * std::numbers::pi * 0.3 * 0.2) < 1e-14);
  }
  SECTION("shift theorem")
  {
    Ellipse e = disk(0.2);
    e.angle = 0.4;
    e.b = 0.1;
    Ellipse s = e;
    s.cx += 0.13;
    s.cy -= 0.07;
    for (auto [fx, fy] : {std::pair{1.3, -0.4}, {0.0, 2.1}, {-3.0, 0.7}}) {
      cdouble const expected =
        ellipse_fourier(e, fx, fy, 0.0) * std::polar(1.0, -2.0 * std::numbers::pi * (fx * 0.13 - fy * 0.07));
      REQUIRE(std::abs(ellipse_fourier(s, fx, fy, 0.0) - expected) < 1e-12);
    }
  }
  SECTION("matches a 512x512 brute-force Fourier sum")
  {
    // k = (0.1, 0) on the desk 128 grid
    Ellipse e = disk(0.3);
    cdouble const a = analytic_ellipse_kspace(e, {0.1, 0.0}, 0.0, 128, 128);
    cdouble const b = dense_fourier(e, 0.1 * 32.0, 0.0, 512) * (128.0 * 128.0 / 4.0);
    REQUIRE(std::abs(a - b) / std::abs(a) < 0.02);

    // and in continuous units for a rotated, off-center ellipse, |k| <= 0.5 on a 64 grid
    Ellipse r;
    r.a = 0.3;
    r.b = 0.18;
    r.angle = 0.5;
    r.cx = 0.1;
    r.cy = -0.15;
    for (auto [kx, ky] : {std::pair{0.0, 0.0}, {0.05, 0.0}, {0.0, 0.1}, {-0.08, 0.06}, {0.125, 0.0}}) {
      cdouble const an = ellipse_fourier(r, kx * 16.0, ky * 16.0, 0.0);
      cdouble const bf = dense_fourier(r, kx * 16.0, ky * 16.0, 512);
      CAPTURE(kx, ky, an, bf);
      REQUIRE(std::abs(an - bf) / std::abs(an) < 0.02);
    }
  }
}

TEST_CASE("coil maps", "[simulator]")
{
  auto const one = coil_maps_analytic(1, 16, 16);
  for (auto const &v : one.maps[0]) { REQUIRE(std::abs(v) == Catch::Approx(1.0).epsilon(1e-12)); }

  auto const cm = coil_maps_analytic(4, 32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      double s = 0.0;
      for (auto const &m : cm.maps) { s += std::norm(m(y, x)); }
      REQUIRE(s == Catch::Approx(1.0).margin(1e-6));
    }
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      double d = 0.0;
      for (std::size_t i = 0; i < cm.maps[a].size(); ++i) {
        d = std::max(d, std::abs(std::abs(cm.maps[a][i]) - std::abs(cm.maps[b][i])));
      }
      REQUIRE(d > 0.1);
    }
  }
  REQUIRE_THROWS_AS(coil_maps_analytic(0, 16, 16), ConfigError);
}

TEST_CASE("motion model", "[simulator]")
{
  MotionModel m;
  m.amplitude = 2.0;
  m.period = 40.0;
  REQUIRE(m(10.0) == 1.0); // clamped
  REQUIRE(m(0.0) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(MotionModel::stationary()(123.0) == 0.0);
}

TEST_CASE("acquisition", "[simulator]")
{
  auto const traj = golden_angle_trajectory(12, 16);
  auto const coils = coil_maps_analytic(2, 16, 16);
  MotionModel motion;
  motion.period = 8.0;

  SECTION("zero phantom gives zero data")
  {
    auto const ds = simulate_acquisition({}, motion, coils, traj, 0.0, 1);
    for (auto const &v : ds.values) { REQUIRE(v == cfloat{}); }
  }

  SECTION("linearity in amplitude")
  {
    Ellipse e = disk(0.4);
    e.m_t = 0.1;
    EllipsePhantom p{{e}};
    e.amplitude *= 2.0;
    EllipsePhantom p2{{e}};
    auto const a = simulate_acquisition(p, motion, coils, traj, 0.0, 1);
    auto const b = simulate_acquisition(p2, motion, coils, traj, 0.0, 1);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      REQUIRE(std::abs(b.values[i] - 2.0f * a.values[i]) <= 1e-5f * (1.0f + std::abs(b.values[i])));
    }
  }

  SECTION("center samples match the analytic DC value")
  {
    auto const one = coil_maps_analytic(1, 64, 64);
    auto const t = golden_angle_trajectory(5, 64);
    Ellipse e = disk(0.5);
    auto const ds = simulate_acquisition({{e}}, MotionModel::stationary(), one, t, 0.0, 1);
    // single coil map has unit magnitude with a phase; compare magnitudes
    for (int s = 0; s < 5; ++s) {
      std::complex<double> const c = ds.value(s * 64 + 32, 0);
      cdouble const ref = analytic_ellipse_kspace(e, {0.0, 0.0}, 0.0, 64, 64);
      ComplexImage lit = phantom_image({{e}}, 0.0, 64, 64);
      cdouble direct = 0.0;
      for (std::size_t i = 0; i < lit.size(); ++i) { direct += lit[i] * one.maps[0][i]; }
      REQUIRE(std::abs(c - direct) / std::abs(direct) < 1e-5);
      // with the phase of the map removed the center value is the ellipse area in pixels
      double unphased = 0.0;
      for (auto const &v : lit) { unphased += v.real(); }
      REQUIRE(std::abs(unphased - std::abs(ref)) / std::abs(ref) < 0.02);
    }
  }

  SECTION("conjugate symmetry for a real single-coil static phantom")
  {
    CoilMaps flat{1, 16, 16, {ComplexImage(16, 16, 1.0)}};
    EllipsePhantom p{{disk(0.4, 0.1, -0.05)}};
    auto const t = golden_angle_trajectory(6, 16);
    auto const ds = simulate_acquisition(p, MotionModel::stationary(), flat, t, 0.0, 3);
    ComplexImage img = phantom_image(p, 0.0, 16, 16);
    for (int s = 0; s < 6; ++s) {
      for (int m = 1; m < 8; ++m) {
        auto const kp = t.at(s, 8 + m), km = t.at(s, 8 - m);
        cdouble const yp = ds.value(s * 16 + 8 + m, 0), ym = ds.value(s * 16 + 8 - m, 0);
        // y(-k) = conj(y(k)) for a real image under a symmetric sum
        auto const ref = nudft_forward(img, std::vector<KPoint>{kp, km});
        REQUIRE(std::abs(ref[1] - std::conj(ref[0])) < 1e-6 * (1.0 + std::abs(ref[0])));
        REQUIRE(std::abs(yp - ref[0]) < 1e-4 * (1.0 + std::abs(ref[0])));
        REQUIRE(std::abs(ym - ref[1]) < 1e-4 * (1.0 + std::abs(ref[1])));
      }
    }
  }

  SECTION("one nav value per spoke and determinism")
  {
    auto const p = EllipsePhantom::abdomen();
    auto const a = simulate_acquisition(p, motion, coils, traj, 0.1, 42);
    for (int s = 0; s < traj.n_spokes; ++s) {
      for (int j = 0; j < 16; ++j) { REQUIRE(a.coords[s * 16 + j].nav == a.coords[s * 16].nav); }
      REQUIRE(a.gt_nav[s] == a.coords[s * 16].nav);
    }
    set_thread_count(1);
    auto const b = simulate_acquisition(p, motion, coils, traj, 0.1, 42);
    set_thread_count(3);
    auto const c = simulate_acquisition(p, motion, coils, traj, 0.1, 42);
    set_thread_count(0);
    REQUIRE(a.values == b.values);
    REQUIRE(a.values == c.values);
    auto const d = simulate_acquisition(p, motion, coils, traj, 0.1, 43);
    REQUIRE(a.values != d.values);
  }

  SECTION("noise statistics")
  {
    auto ds = simulate_acquisition({}, motion, coils, golden_angle_trajectory(200, 16), 0.0, 1);
    add_noise(ds, 0.5, 9);
    double s = 0.0;
    for (auto const &v : ds.values) { s += std::norm(v); }
    REQUIRE(s / ds.values.size() == Catch::Approx(0.25).epsilon(0.05));
  }

  SECTION("mismatched coil grid is rejected")
  {
    auto const wrong = coil_maps_analytic(2, 32, 32);
    REQUIRE_THROWS(simulate_acquisition({}, motion, wrong, traj, 0.0, 1));
  }
}
