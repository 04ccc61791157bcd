#include "iconik/classic_recon.hpp"
#include "iconik/error.hpp"
#include "iconik/navigator.hpp"
#include "iconik/nufft.hpp"

#include <Eigen/Dense>
#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace iconik;

namespace {

double nrmse(ComplexImage const &a, ComplexImage const &ref)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return std::sqrt(num / den);
}

EllipsePhantom plain_phantom()
{
  Ellipse e;
  e.a = 0.5;
  e.b = 0.4;
  e.angle = 0.3;
  Ellipse f;
  f.a = 0.15;
  f.b = 0.2;
  f.cx = 0.15;
  f.amplitude = 0.5;
  return {{e, f}};
}

KSpaceDataset static_dataset(int N, int spokes, int n_c, double noise = 0.0)
{
  auto const traj = golden_angle_trajectory(spokes, N);
  return simulate_acquisition(plain_phantom(), MotionModel::stationary(), coil_maps_analytic(n_c, N, N),
                              traj, noise, 5);
}

ImageSeries random_series(int n, int H, int W, std::mt19937_64 &rng)
{
  std::normal_distribution<double> g;
  ImageSeries x(n, ComplexImage(H, W));
  for (auto &im : x) {
    for (auto &v : im) { v = {g(rng), g(rng)}; }
  }
  return x;
}

// max over components of |fd - analytic| relative to the gradient's largest entry
template <class F>
double fd_error(ImageSeries x, ImageSeries const &g, F &&f, double h, std::mt19937_64 &rng, int checks)
{
  double gmax = 0.0;
  for (auto const &im : g) {
    for (auto const &v : im) { gmax = std::max({gmax, std::abs(v.real()), std::abs(v.imag())}); }
  }
  std::uniform_int_distribution<std::size_t> pick_d(0, x.size() - 1), pick_p(0, x[0].size() - 1);
  double worst = 0.0;
  for (int c = 0; c < checks; ++c) {
    std::size_t const d = pick_d(rng), p = pick_p(rng);
    for (cdouble dir : {cdouble(1.0, 0.0), cdouble(0.0, 1.0)}) {
      cdouble const keep = x[d][p];
      x[d][p] = keep + h * dir;
      double const fp = f(x);
      x[d][p] = keep - h * dir;
      double const fm = f(x);
      x[d][p] = keep;
      double const fd = (fp - fm) / (2.0 * h);
      double const an = dir.real() != 0.0 ? g[d][p].real() : g[d][p].imag();
      worst = std::max(worst, std::abs(fd - an) / gmax);
    }
  }
  return worst;
}

} // namespace

TEST_CASE("inufft reconstruction", "[classic]")
{
  SECTION("fully sampled static bin at 64x64")
  {
    auto const ds = static_dataset(64, 101, 4);
    auto const coils = coil_maps_analytic(4, 64, 64);
    auto const rec = inufft_recon({ds}, coils);
    REQUIRE(rec.n_states() == 1);
    REQUIRE(nrmse(rec.states[0], phantom_image(plain_phantom(), 0.0, 64, 64)) < 0.15);
  }
  SECTION("zero data")
  {
    auto ds = static_dataset(16, 10, 2);
    for (auto &v : ds.values) { v = 0.0f; }
    auto const rec = inufft_recon({ds}, coil_maps_analytic(2, 16, 16));
    for (auto const &v : rec.states[0]) { REQUIRE(v == cdouble{}); }
  }
  SECTION("single unit coil equals the weighted adjoint")
  {
    CoilMaps one{1, 16, 16, {ComplexImage(16, 16, 1.0)}};
    auto const traj = golden_angle_trajectory(10, 16);
    auto const ds = simulate_acquisition(EllipsePhantom::abdomen(), MotionModel::stationary(), one, traj, 0.0, 1);
    auto const rec = inufft_recon({ds}, one);
    std::vector<cdouble> y(ds.values.begin(), ds.values.end());
    auto const k = ds.kpoints();
    auto const ref = nudft_adjoint(y, k, radial_density_weights(traj).w, 16, 16);
    REQUIRE(nrmse(rec.states[0], ref) < 1e-12);
  }
  SECTION("metadata mismatch")
  {
    auto const ds = static_dataset(16, 10, 2);
    REQUIRE_THROWS_AS(inufft_recon({ds}, coil_maps_analytic(3, 16, 16)), DataError);
  }
}

TEST_CASE("total variation", "[classic]")
{
  std::mt19937_64 rng(1);
  SECTION("constant input has zero gradient")
  {
    ImageSeries x(2, ComplexImage(8, 8, cdouble(0.3, -1.0)));
    for (auto const &im : tv_grad(x, 1e-6)) {
      for (auto const &v : im) { REQUIRE(std::abs(v) < 1e-12); }
    }
  }
  SECTION("finite differences at 2x8x8, mu = 1e-6")
  {
    auto const x = random_series(2, 8, 8, rng);
    for (unsigned axes : {unsigned(TvAll), unsigned(TvTemporal), unsigned(TvSpatial)}) {
      auto const g = tv_grad(x, 1e-6, axes);
      double const err = fd_error(x, g, [&](ImageSeries const &z) { return tv_value(z, 1e-6, axes); }, 1e-6, rng, 40);
      REQUIRE(err < 1e-5);
    }
  }
  SECTION("hot pixel")
  {
    ImageSeries x(2, ComplexImage(8, 8));
    x[0](4, 4) = 1.0;
    auto const g = tv_grad(x, 1e-6);
    REQUIRE(g[0](4, 4).real() > 0.0);
    REQUIRE(g[0](3, 4).real() < 0.0);
    REQUIRE(g[0](4, 3).real() < 0.0);
    REQUIRE(g[1](4, 4).real() < 0.0);
    cdouble sum = 0.0;
    for (auto const &im : g) {
      for (auto const &v : im) { sum += v; }
    }
    REQUIRE(std::abs(sum) < 1e-12);
  }
  SECTION("circular temporal differences")
  {
    ImageSeries x(3, ComplexImage(8, 8));
    x[2](0, 0) = 1.0;
    // |x2 - x1| and |x0 - x2| both count
    REQUIRE(tv_value(x, 1e-12, TvTemporal) == Catch::Approx(2.0 + 190 * 1e-6).margin(1e-5));
  }
}

TEST_CASE("objective", "[classic]")
{
  auto ds = static_dataset(16, 12, 2);
  auto const coils = coil_maps_analytic(2, 16, 16);
  XDGraspConfig cfg;
  cfg.density_weighting = false;
  cfg.lambda_spatial = cfg.lambda_temporal = 0.0;
  ImageSeries const zero(1, ComplexImage(16, 16));

  double y2 = 0.0;
  for (auto const &v : ds.values) { y2 += std::norm(cdouble(v)); }
  REQUIRE(objective_value({ds}, coils, zero, cfg) == Catch::Approx(y2).epsilon(1e-12));
  auto ds2 = ds;
  for (auto &v : ds2.values) { v *= 2.0f; }
  REQUIRE(objective_value({ds2}, coils, zero, cfg) == Catch::Approx(4.0 * y2).epsilon(1e-12));
  for (auto &v : ds.values) { v = 0.0f; }
  REQUIRE(objective_value({ds}, coils, zero, cfg) == 0.0);
}

TEST_CASE("objective gradient matches finite differences", "[classic]")
{
  auto const coils = coil_maps_analytic(2, 8, 8);
  auto const traj = golden_angle_trajectory(16, 8);
  MotionModel motion;
  motion.period = 5.0;
  auto const ds = simulate_acquisition(EllipsePhantom::abdomen(), motion, coils, traj, 0.05, 2);
  auto const bins = bin_by_navigator(ds, oracle_navigator(ds), 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto const x = random_series(2, 8, 8, rng);
    XDGraspConfig cfg;
    cfg.mu = 1e-3;
    cfg.density_weighting = seed % 2 == 0;
    ImageSeries g;
    objective_with_gradient(bins, coils, x, 0.3, 0.7, cfg, &g);
    auto f = [&](ImageSeries const &z) { return objective_with_gradient(bins, coils, z, 0.3, 0.7, cfg, nullptr); };
    double const err = fd_error(x, g, f, 1e-5, rng, 30);
    CAPTURE(seed, err);
    REQUIRE(err < 1e-4);
  }
}

TEST_CASE("least-squares solution at 32x32", "[classic]")
{
  int const N = 32, nc = 2;
  auto const ds = static_dataset(N, 51, nc);
  auto const coils = coil_maps_analytic(nc, N, N);
  auto const k = ds.kpoints();
  auto const w = radial_density_profile(51, N);
  std::size_t const M = k.size(), P = static_cast<std::size_t>(N) * N;

  // weighted normal equations A^H W A x = A^H W y solved densely. The grid corners
  // outside the sampled disk are a null space; a tiny ridge picks the minimum-norm
  // solution, which is where CG started from the adjoint converges.
  Eigen::MatrixXcd A(M * nc, P);
  Eigen::VectorXcd y(M * nc);
  Eigen::VectorXd sw(M * nc);
  for (std::size_t m = 0; m < M; ++m) {
    for (int c = 0; c < nc; ++c) {
      std::size_t const row = m * nc + c;
      y(row) = cdouble(ds.value(m, c));
      sw(row) = std::sqrt(w[m % N]);
      for (int py = 0; py < N; ++py) {
        for (int px = 0; px < N; ++px) {
          double const ph = -std::numbers::pi * (k[m].kx * (px - N / 2) + k[m].ky * (py - N / 2));
          A(row, py * N + px) = std::polar(1.0, ph) * coils.maps[c](py, px);
        }
      }
    }
  }
  Eigen::MatrixXcd const WA = sw.asDiagonal() * A;
  Eigen::MatrixXcd normal = WA.adjoint() * WA;
  double const ridge = 1e-7 * normal.diagonal().real().mean();
  normal.diagonal().array() += ridge;
  Eigen::VectorXcd const rhs = WA.adjoint() * (sw.asDiagonal() * y);
  Eigen::VectorXcd const xs = normal.llt().solve(rhs);
  ComplexImage ref(N, N);
  for (std::size_t p = 0; p < P; ++p) { ref[p] = xs(p); }

  XDGraspConfig cfg;
  cfg.lambda_spatial = cfg.lambda_temporal = 0.0;
  cfg.n_iter = 30;
  auto const res = xdgrasp_recon({ds}, coils, cfg);
  double const e = nrmse(res.image.states[0], ref);
  CAPTURE(e);
  REQUIRE(e < 0.05);
  // the oracle is itself close to the phantom
  REQUIRE(nrmse(ref, phantom_image(plain_phantom(), 0.0, N, N)) < 0.15);
}

TEST_CASE("xdgrasp behavior", "[classic]")
{
  int const N = 32;
  auto const coils = coil_maps_analytic(2, N, N);
  auto const traj = golden_angle_trajectory(60, N);
  MotionModel motion;
  motion.period = 13.0;
  auto ds = simulate_acquisition(EllipsePhantom::abdomen(), motion, coils, traj, 0.0, 1);
  add_noise(ds, 0.02 * mean_center_magnitude(ds), 2);
  auto const bins = bin_by_navigator(ds, oracle_navigator(ds), 4);

  XDGraspConfig cfg;
  cfg.n_iter = 40;
  auto const res = xdgrasp_recon(bins, coils, cfg);
  REQUIRE(res.objective.size() >= 2);
  for (std::size_t i = 1; i < res.objective.size(); ++i) {
    REQUIRE(res.objective[i] <= res.objective[i - 1] + 1e-12 * std::abs(res.objective[0]));
  }
  REQUIRE(res.objective.back() < res.objective.front());
  REQUIRE(res.objective.front() == Catch::Approx(objective_value(bins, coils, inufft_recon(bins, coils).states, cfg)));

  auto temporal_sd = [](ImageSeries const &x) {
    double s = 0.0;
    for (std::size_t p = 0; p < x[0].size(); ++p) {
      cdouble mean = 0.0;
      for (auto const &im : x) { mean += im[p]; }
      mean /= double(x.size());
      for (auto const &im : x) { s += std::norm(im[p] - mean); }
    }
    return std::sqrt(s);
  };
  XDGraspConfig free = cfg, tied = cfg;
  free.lambda_temporal = 0.0;
  free.lambda_spatial = 0.0;
  tied.lambda_temporal = 10.0;
  tied.lambda_spatial = 0.0;
  double const sd0 = temporal_sd(xdgrasp_recon(bins, coils, free).image.states);
  double const sd10 = temporal_sd(xdgrasp_recon(bins, coils, tied).image.states);
  CAPTURE(sd0, sd10);
  REQUIRE(sd10 < 0.1 * sd0);

  REQUIRE(objective_csv({1.0, 0.5}).rfind("iteration,objective\n0,1\n1,0.5\n", 0) == 0);
}

TEST_CASE("xdgrasp config validation", "[classic]")
{
  XDGraspConfig c;
  REQUIRE_NOTHROW(c.validate());
  c.mu = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda_temporal = -1.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_iter = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
}
