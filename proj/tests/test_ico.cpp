#include "iconik/error.hpp"
#include "iconik/ico.hpp"
#include "iconik/nik.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace iconik;

namespace {

std::vector<cdouble> random_complex(std::size_t n, std::mt19937_64 &rng, double s = 1.0)
{
  std::normal_distribution<double> g(0.0, s);
  std::vector<cdouble> v(n);
  for (auto &x : v) { x = {g(rng), g(rng)}; }
  return v;
}

IcoKernel random_kernel(int n_c, int hidden, std::mt19937_64 &rng)
{
  IcoKernel k = zero_kernel(n_c, hidden, 16);
  k.value_scale = 1.7;
  for (auto &l : k.layers) {
    l.w = random_complex(l.w.size(), rng, 0.4);
    l.b = random_complex(l.b.size(), rng, 0.2);
  }
  return k;
}

// independent oracle: each output pixel of each layer as an explicit 3x3 sum
std::vector<cdouble> oracle_forward(IcoKernel const &k, std::vector<cdouble> const &patch)
{
  std::vector<cdouble> cur(patch);
  for (auto &v : cur) { v /= k.value_scale; }
  int size = 7;
  for (int l = 0; l < 3; ++l) {
    auto const &L = k.layers[l];
    int const os = size - 2;
    std::vector<cdouble> next(static_cast<std::size_t>(L.out) * os * os);
    for (int o = 0; o < L.out; ++o) {
      for (int y = 0; y < os; ++y) {
        for (int x = 0; x < os; ++x) {
          cdouble s = L.b[o];
          for (int i = 0; i < L.in; ++i) {
            for (int a = 0; a < 3; ++a) {
              for (int b = 0; b < 3; ++b) { s += L.at(o, i, a, b) * cur[(i * size + y + a) * size + x + b]; }
            }
          }
          if (l < 2) { s = {std::max(0.0, s.real()), std::max(0.0, s.imag())}; }
          next[(o * os + y) * os + x] = s;
        }
      }
    }
    cur = std::move(next);
    size = os;
  }
  for (auto &v : cur) { v *= k.value_scale; }
  return cur;
}

NikModel small_nik(int n_c)
{
  NikArch a;
  a.fourier_features = 16;
  a.layers = 3;
  a.width = 16;
  a.n_coils = n_c;
  a.scale_k = 2.0;
  a.seed = 3;
  NikModel m(a);
  m.value_scale = 40.0;
  return m;
}

} // namespace

TEST_CASE("patch coordinates", "[ico]")
{
  int const n = 16;
  double const d = 2.0 / n;
  Coord3 const v{0.3, 0.25, -0.5};
  auto const p = sample_patch_coords(v, n);
  REQUIRE(p.points[24].kx == v.kx);
  REQUIRE(p.points[24].ky == v.ky);
  REQUIRE(p.points[0].kx == Catch::Approx(v.kx - 3 * d));
  REQUIRE(p.points[0].ky == Catch::Approx(v.ky - 3 * d));
  REQUIRE(p.points[48].kx == Catch::Approx(v.kx + 3 * d));
  REQUIRE(p.points[48].ky == Catch::Approx(v.ky + 3 * d));
  for (auto const &c : p.points) { REQUIRE(c.nav == 0.3); }
  for (bool f : p.out_of_range) { REQUIRE_FALSE(f); }

  auto const edge = sample_patch_coords({0.0, 1.0 - d, 0.0}, n);
  int flagged_cols = 0;
  for (int dx = 0; dx < 7; ++dx) {
    bool col = true;
    for (int dy = 0; dy < 7; ++dy) { col = col && edge.out_of_range[dy * 7 + dx]; }
    flagged_cols += col;
  }
  REQUIRE(flagged_cols == 3);
}

TEST_CASE("stack forward", "[ico]")
{
  std::mt19937_64 rng(1);
  auto const patch = random_complex(3 * kPatchPoints, rng, 5.0);

  SECTION("zero kernel")
  {
    for (auto const &v : ico_forward(zero_kernel(3, 6, 16), patch)) { REQUIRE(v == cdouble{}); }
  }
  SECTION("near identity passes the center through")
  {
    auto const k = near_identity_kernel(3, 6, 16, 7.0, 5);
    auto const out = ico_forward(k, patch);
    for (int c = 0; c < 3; ++c) { REQUIRE(std::abs(out[c] - patch[c * kPatchPoints + 24]) < 1e-6); }
  }
  SECTION("random kernel against a direct oracle")
  {
    for (int trial = 0; trial < 5; ++trial) {
      auto const k = random_kernel(3, 5, rng);
      auto const p = random_complex(3 * kPatchPoints, rng, 2.0);
      auto const a = ico_forward(k, p), b = oracle_forward(k, p);
      for (int c = 0; c < 3; ++c) { REQUIRE(std::abs(a[c] - b[c]) < 1e-10); }
    }
  }
  SECTION("shape errors")
  {
    REQUIRE_THROWS_AS(ico_forward(zero_kernel(3, 6, 16), std::vector<cdouble>(10)), DataError);
    REQUIRE_THROWS_AS(zero_kernel(3, 2, 16), ConfigError);
  }
}

TEST_CASE("kernel parameters", "[ico]")
{
  std::mt19937_64 rng(2);
  auto const k = random_kernel(2, 4, rng);
  REQUIRE(k.parameter_count() == (2 * 4 * 9 + 4) + (4 * 4 * 9 + 4) + (4 * 2 * 9 + 2));
  auto copy = zero_kernel(2, 4, 16);
  copy.value_scale = k.value_scale;
  copy.set_parameters(k.parameters());
  REQUIRE(copy.parameters() == k.parameters());
  REQUIRE_NOTHROW(copy.validate());
  REQUIRE_THROWS_AS(copy.set_parameters(std::vector<cdouble>(3)), DataError);
  copy.layers[1].w.pop_back();
  REQUIRE_THROWS_AS(copy.validate(), DataError);
}

TEST_CASE("batch loss gradient matches finite differences", "[ico]")
{
  HdrLossParams const lp{0.5, 1e-2, 0.1};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed + 10);
    auto k = random_kernel(2, 3, rng);
    std::size_t const batch = 3;
    auto const patches = random_complex(batch * 2 * kPatchPoints, rng, 2.0);
    auto const targets = random_complex(batch * 2, rng, 1.0);
    std::vector<double> r2{0.01, 0.2, 0.5};
    std::vector<cdouble> grad;
    ico_batch_loss(k, patches, targets, r2, lp, &grad);

    // denominator frozen at the base prediction
    std::vector<double> denom(batch * 2);
    for (std::size_t s = 0; s < batch; ++s) {
      auto const out = ico_forward(k, std::span(patches).subspan(s * 2 * kPatchPoints, 2 * kPatchPoints));
      for (int c = 0; c < 2; ++c) { denom[s * 2 + c] = std::abs(out[c] / k.value_scale) + lp.eps; }
    }
    auto oracle = [&](IcoKernel const &kk) {
      double total = 0.0;
      for (std::size_t s = 0; s < batch; ++s) {
        auto const out = oracle_forward(kk, std::vector<cdouble>(patches.begin() + s * 2 * kPatchPoints,
                                                                  patches.begin() + (s + 1) * 2 * kPatchPoints));
        double const w = std::exp(-r2[s] / (2.0 * lp.sigma * lp.sigma));
        double l = 0.0;
        for (int c = 0; c < 2; ++c) {
          cdouble const e = (out[c] - targets[s * 2 + c]) / kk.value_scale;
          l += std::norm(e / denom[s * 2 + c]) + lp.lambda * std::norm(w * e);
        }
        total += l / 2.0;
      }
      return total / batch;
    };
    auto params = k.parameters();
    double gmax = 0.0;
    for (auto const &g : grad) { gmax = std::max({gmax, std::abs(g.real()), std::abs(g.imag())}); }
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); i += 3) {
      for (cdouble dir : {cdouble(1, 0), cdouble(0, 1)}) {
        double const h = 1e-6;
        cdouble const keep = params[i];
        params[i] = keep + h * dir;
        k.set_parameters(params);
        double const fp = oracle(k);
        params[i] = keep - h * dir;
        k.set_parameters(params);
        double const fm = oracle(k);
        params[i] = keep;
        k.set_parameters(params);
        double const fd = (fp - fm) / (2 * h);
        double const an = dir.real() != 0.0 ? grad[i].real() : grad[i].imag();
        worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), 1e-3 * gmax));
      }
    }
    CAPTURE(seed, worst);
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("acr membership", "[ico]")
{
  AcrSpec acr{0.4};
  REQUIRE(acr.contains(0.0, 0.0));
  REQUIRE(acr.contains(0.39, 0.0));
  REQUIRE_FALSE(acr.contains(0.4, 0.0));
  REQUIRE_FALSE(acr.contains(0.0, -0.4));
  REQUIRE_THROWS_AS(AcrSpec{0.0}.validate(), ConfigError);
  REQUIRE_THROWS_AS(AcrSpec{1.5}.validate(), ConfigError);
}

TEST_CASE("whole-grid inference", "[ico]")
{
  int const N = 16, nc = 2;
  auto const nik = small_nik(nc);
  std::uint64_t const before = nik.hash();

  SECTION("near identity reproduces the NIK grid")
  {
    auto const k = near_identity_kernel(nc, 2 * nc, N, nik.value_scale, 1);
    auto const a = iconik_infer(nik, k, 0.2, N, N), b = infer_grid(nik, 0.2, N, N);
    for (int c = 0; c < nc; ++c) {
      for (std::size_t p = 0; p < b.coils[c].size(); ++p) { REQUIRE(std::abs(a.coils[c][p] - b.coils[c][p]) < 1e-6); }
    }
  }
  SECTION("two paths agree at random locations")
  {
    std::mt19937_64 rng(4);
    auto k = random_kernel(nc, 4, rng);
    k.n_fe = N;
    k.value_scale = nik.value_scale;
    double const nav = -0.35;
    auto const grid = iconik_infer(nik, k, nav, N, N);
    std::uniform_int_distribution<int> pick(0, N - 1);
    for (int t = 0; t < 10; ++t) {
      int const y = pick(rng), x = pick(rng);
      Coord3 const v{nav, (x - N / 2) * 2.0 / N, (y - N / 2) * 2.0 / N};
      auto const pc = sample_patch_coords(v, N);
      auto const pred = nik.forward(pc.points);
      std::vector<cdouble> patch(nc * kPatchPoints);
      for (int p = 0; p < kPatchPoints; ++p) {
        for (int c = 0; c < nc; ++c) { patch[c * kPatchPoints + p] = pred[p * nc + c]; }
      }
      auto const out = ico_forward(k, patch);
      for (int c = 0; c < nc; ++c) { REQUIRE(std::abs(out[c] - grid.coils[c](y, x)) < 1e-10); }
    }
  }
  SECTION("size and coil mismatches")
  {
    auto const k = near_identity_kernel(nc, 4, N, 1.0, 1);
    REQUIRE_THROWS_AS(iconik_infer(nik, k, 0.0, 32, 32), ConfigError);
    auto const k3 = near_identity_kernel(3, 6, N, 1.0, 1);
    REQUIRE_THROWS_AS(iconik_infer(nik, k3, 0.0, N, N), ConfigError);
  }
  REQUIRE(nik.hash() == before);
}

TEST_CASE("receptive field", "[ico]")
{
  std::mt19937_64 rng(9);
  auto const k = random_kernel(1, 2, rng);
  int const n = 12;
  auto const in = random_complex(static_cast<std::size_t>(n) * n, rng);
  auto run = [&](std::vector<cdouble> const &x) {
    auto a = conv_valid(k.layers[0], x, n, n);
    for (auto &v : a) { v = {std::max(0.0, v.real()), std::max(0.0, v.imag())}; }
    auto b = conv_valid(k.layers[1], a, n - 2, n - 2);
    for (auto &v : b) { v = {std::max(0.0, v.real()), std::max(0.0, v.imag())}; }
    return conv_valid(k.layers[2], b, n - 4, n - 4);
  };
  auto const base = run(in);
  // output (0, 0) sees inputs rows/cols 0..6 only
  auto moved = in;
  moved[7 * n + 3] += 10.0;
  moved[2 * n + 7] += 10.0;
  REQUIRE(run(moved)[0] == base[0]);
  REQUIRE(run(moved)[1] != base[1]);
}

TEST_CASE("calibration", "[ico]")
{
  int const N = 16, nc = 2;
  auto const traj = golden_angle_trajectory(30, N);
  MotionModel motion;
  motion.period = 11.0;
  auto const ds = simulate_acquisition(EllipsePhantom::abdomen(), motion, coil_maps_analytic(nc, N, N), traj, 0.0, 2);

  NikArch arch;
  arch.fourier_features = 32;
  arch.layers = 3;
  arch.width = 32;
  arch.n_coils = nc;
  arch.scale_k = 3.0;
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.batch_size = 128;
  tc.epochs = 10;
  auto const nik = train_nik(ds, arch, tc);
  std::uint64_t const before = nik.hash();

  TrainConfig ic;
  ic.lr = 1e-3;
  ic.batch_size = 64;
  ic.epochs = 5;
  auto const cal = calibrate_ico(nik, ds, AcrSpec{0.4}, ic);
  REQUIRE(nik.hash() == before);
  REQUIRE(cal.acr_samples > 0);
  REQUIRE(cal.epoch_loss.size() == 5);
  REQUIRE(cal.final_loss <= cal.identity_loss);
  REQUIRE(cal.kernel.hidden == 2 * nc);
  REQUIRE(calibration_csv(cal).rfind("epoch,loss\n0,", 0) == 0);

  std::size_t inside = 0;
  for (std::size_t i = 0; i < ds.samples(); ++i) { inside += std::hypot(ds.coords[i].kx, ds.coords[i].ky) < 0.4; }
  REQUIRE(cal.acr_samples == inside);

  // repeatable
  auto const again = calibrate_ico(nik, ds, AcrSpec{0.4}, ic);
  REQUIRE(again.kernel.parameters() == cal.kernel.parameters());

  auto far = ds;
  for (auto &c : far.coords) { c.kx = 0.9; }
  REQUIRE_THROWS_AS(calibrate_ico(nik, far, AcrSpec{0.4}, ic), DataError);
}
