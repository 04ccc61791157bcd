#include "iconik/error.hpp"
#include "iconik/nik.hpp"
#include "iconik/nufft.hpp"
#include "iconik/simd/kernels.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace iconik;

namespace {

NikArch tiny_arch(int n_c = 2)
{
  NikArch a;
  a.fourier_features = 6;
  a.layers = 3;
  a.width = 5;
  a.n_coils = n_c;
  a.scale_k = 2.0;
  a.seed = 11;
  return a;
}

std::vector<Coord3> random_coords(std::size_t n, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Coord3> v(n);
  for (auto &c : v) { c = {u(rng), u(rng), u(rng)}; }
  return v;
}

KSpaceDataset small_dataset(int spokes, int n_fe, int n_c)
{
  auto const traj = golden_angle_trajectory(spokes, n_fe);
  MotionModel motion;
  motion.period = 9.0;
  return simulate_acquisition(EllipsePhantom::abdomen(), motion, coil_maps_analytic(n_c, n_fe, n_fe), traj, 0.0, 4);
}

} // namespace

TEST_CASE("fourier encoding", "[nik]")
{
  auto const enc = FourierEncoding::gaussian(4000, 1.0, 3.0, 9);
  REQUIRE(enc.B.size() == 12000);
  double s0 = 0.0, s1 = 0.0;
  for (int i = 0; i < 4000; ++i) {
    s0 += enc.B[i * 3] * enc.B[i * 3];
    s1 += enc.B[i * 3 + 1] * enc.B[i * 3 + 1];
  }
  REQUIRE(std::sqrt(s0 / 4000) == Catch::Approx(1.0).epsilon(0.05));
  REQUIRE(std::sqrt(s1 / 4000) == Catch::Approx(3.0).epsilon(0.05));

  auto const small = FourierEncoding::gaussian(3, 1.0, 2.0, 1);
  Coord3 const v{0.2, -0.4, 0.7};
  auto const f = encode(small, v);
  REQUIRE(f.size() == 6);
  for (int i = 0; i < 3; ++i) {
    double const arg = 2.0 * std::numbers::pi * (small.B[i * 3] * v.nav + small.B[i * 3 + 1] * v.kx + small.B[i * 3 + 2] * v.ky);
    REQUIRE(f[i] == Catch::Approx(std::sin(arg)).margin(1e-14));
    REQUIRE(f[i + 3] == Catch::Approx(std::cos(arg)).margin(1e-14));
  }
  REQUIRE(FourierEncoding::gaussian(3, 1.0, 2.0, 1).B == small.B);
}

TEST_CASE("hdr loss", "[nik]")
{
  HdrLossParams p;
  std::vector<cdouble> pred{{1.0, 0.0}, {0.0, 0.5}}, target{{0.5, 0.0}, {0.0, 0.5}};
  std::vector<double> r2{0.0};
  // first coil: |0.5|^2 / (1 + eps)^2 + lambda * 0.25; second coil exact
  double const expected = (0.25 / std::pow(1.01, 2) + 0.1 * 0.25) / 2.0;
  REQUIRE(hdr_loss(pred, target, r2, 2, p) == Catch::Approx(expected).epsilon(1e-14));
  r2[0] = 4.0; // w(k) = exp(-2), squared inside the norm
  double const far = (0.25 / std::pow(1.01, 2) + 0.1 * std::exp(-4.0) * 0.25) / 2.0;
  REQUIRE(hdr_loss(pred, target, r2, 2, p) == Catch::Approx(far).epsilon(1e-14));
  REQUIRE(hdr_loss(target, target, r2, 2, p) == 0.0);
  REQUIRE_THROWS_AS(hdr_loss(pred, target, std::vector<double>{0.0, 0.0}, 2, p), DataError);
}

TEST_CASE("parameter gradients match finite differences with a frozen denominator", "[nik]")
{
  HdrLossParams const lp{0.7, 1e-2, 0.3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    NikArch arch = tiny_arch();
    arch.seed = seed + 1;
    BasicNikModel<double> model(arch);
    auto const v = random_coords(4, rng);
    std::normal_distribution<double> g;
    int const no = 2 * arch.n_coils;
    std::vector<double> target(4 * no), r2(4);
    for (auto &t : target) { t = 0.3 * g(rng); }
    for (int i = 0; i < 4; ++i) { r2[i] = v[i].kx * v[i].kx + v[i].ky * v[i].ky; }

    // analytic gradient through the library path
    std::vector<double> x(4 * model.encoding.features());
    for (int i = 0; i < 4; ++i) { model.encoding.encode(v[i], x.data() + i * model.encoding.features()); }
    Mlp<double>::Workspace ws;
    double const *out = model.mlp.forward(x.data(), 4, ws);
    std::vector<double> pred(out, out + 4 * no), dpred(4 * no);
    hdr_loss(pred.data(), target.data(), r2.data(), 4, arch.n_coils, lp, dpred.data());
    auto grad = model.mlp.zeros_like();
    model.mlp.backward(x.data(), ws, dpred.data(), grad);
    std::vector<double> flat_grad;
    for (auto const &L : grad) {
      flat_grad.insert(flat_grad.end(), L.w.begin(), L.w.end());
      flat_grad.insert(flat_grad.end(), L.b.begin(), L.b.end());
    }

    // oracle: the loss written out directly, denominators fixed at the base prediction
    std::vector<double> denom(4 * arch.n_coils);
    for (std::size_t i = 0; i < denom.size(); ++i) { denom[i] = std::hypot(pred[2 * i], pred[2 * i + 1]) + lp.eps; }
    auto oracle = [&](std::vector<double> const &params) {
      BasicNikModel<double> m = model;
      m.set_parameters(params);
      auto const y = m.forward_normalized(v);
      double s = 0.0;
      for (int i = 0; i < 4; ++i) {
        double const w = std::exp(-r2[i] / (2.0 * lp.sigma * lp.sigma));
        for (int c = 0; c < arch.n_coils; ++c) {
          std::size_t const o = i * no + 2 * c;
          cdouble const e(y[o] - target[o], y[o + 1] - target[o + 1]);
          s += std::norm(e / denom[i * arch.n_coils + c]) + lp.lambda * std::norm(w * e);
        }
      }
      return s / (4.0 * arch.n_coils);
    };
    auto params = model.parameters();
    REQUIRE(flat_grad.size() == params.size());
    double gmax = 0.0;
    for (double d : flat_grad) { gmax = std::max(gmax, std::abs(d)); }
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      double const h = 1e-6, keep = params[k];
      params[k] = keep + h;
      double const fp = oracle(params);
      params[k] = keep - h;
      double const fm = oracle(params);
      params[k] = keep;
      double const fd = (fp - fm) / (2.0 * h);
      double const rel = std::abs(fd - flat_grad[k]) / std::max(std::abs(fd), 1e-3 * gmax);
      worst = std::max(worst, rel);
    }
    CAPTURE(seed, worst);
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("model construction and parameters", "[nik]")
{
  auto const arch = tiny_arch(3);
  NikModel a(arch), b(arch);
  REQUIRE(a.parameters() == b.parameters());
  REQUIRE(a.hash() == b.hash());
  // 12 -> 5 -> 5 -> 6
  REQUIRE(a.mlp.parameter_count() == 12 * 5 + 5 + 5 * 5 + 5 + 5 * 6 + 6);
  auto p = a.parameters();
  p[3] += 1.0f;
  b.set_parameters(p);
  REQUIRE(b.hash() != a.hash());
  REQUIRE_THROWS_AS(b.set_parameters(std::vector<float>(3)), DataError);

  NikArch z = arch;
  z.zero_output = true;
  NikModel zm(z);
  std::mt19937_64 rng(1);
  for (auto const &v : zm.forward(random_coords(5, rng))) { REQUIRE(v == cdouble{}); }

  NikArch bad = arch;
  bad.layers = 1;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = arch;
  bad.n_coils = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward is batch independent and matches across kernels", "[nik]")
{
  NikArch arch = tiny_arch(2);
  arch.width = 33;
  NikModel m(arch);
  std::mt19937_64 rng(3);
  auto const v = random_coords(2500, rng); // spans two internal chunks
  auto const all = m.forward_normalized(v);
  for (std::size_t i : {0u, 777u, 2049u, 2499u}) {
    auto const one = m.forward_normalized(std::span<Coord3 const>(&v[i], 1));
    for (int c = 0; c < 4; ++c) { REQUIRE(one[c] == all[i * 4 + c]); }
  }
  if (simd::avx2_kernels()) {
    simd::select_isa(simd::Isa::Scalar);
    auto const s = m.forward_normalized(v);
    simd::select_isa(simd::Isa::Avx2);
    auto const a = m.forward_normalized(v);
    for (std::size_t i = 0; i < s.size(); ++i) { REQUIRE(a[i] == Catch::Approx(s[i]).epsilon(1e-4).margin(1e-6)); }
  }
}

TEST_CASE("adam", "[nik]")
{
  // minimizes a quadratic
  Adam<double> opt(2, 0.9, 0.999, 1e-8);
  std::vector<double> x{3.0, -2.0};
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g{2.0 * x[0], 8.0 * x[1]};
    opt.step(x, g, 1e-2);
  }
  REQUIRE(std::abs(x[0]) < 1e-2);
  REQUIRE(std::abs(x[1]) < 1e-2);
  // first step moves every coordinate by lr regardless of gradient scale
  Adam<double> fresh(2, 0.9, 0.999, 1e-8);
  std::vector<double> y{0.0, 0.0}, gy{1e-3, -50.0};
  fresh.step(y, gy, 0.1);
  REQUIRE(y[0] == Catch::Approx(-0.1).epsilon(1e-4));
  REQUIRE(y[1] == Catch::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("train config validation", "[nik]")
{
  TrainConfig c;
  REQUIRE_NOTHROW(c.validate());
  c.lr = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.epochs = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.loss.eps = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training", "[nik]")
{
  auto const ds = small_dataset(24, 16, 2);
  NikArch arch;
  arch.fourier_features = 32;
  arch.layers = 3;
  arch.width = 32;
  arch.n_coils = 2;
  arch.scale_k = 3.0;
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.batch_size = 64;
  cfg.epochs = 25;
  cfg.seed = 5;
  TrainLog log;
  int calls = 0;
  auto const m = train_nik(ds, arch, cfg, &log, [&](int, double, NikModel const &) { ++calls; });
  REQUIRE(calls == 25);
  REQUIRE(log.epoch_loss.size() == 25);
  REQUIRE(log.epoch_loss.back() < 0.5 * log.epoch_loss.front());
  for (std::size_t i = 1; i < log.best_so_far.size(); ++i) { REQUIRE(log.best_so_far[i] <= log.best_so_far[i - 1]); }
  REQUIRE(m.state.best_loss == log.best_so_far.back());
  REQUIRE(m.state.epochs_run == 25);
  REQUIRE(m.nav_min == Catch::Approx(*std::min_element(ds.gt_nav.begin(), ds.gt_nav.end())));

  double vmax = 0.0;
  for (auto const &v : ds.values) { vmax = std::max(vmax, double(std::abs(v))); }
  REQUIRE(m.value_scale == Catch::Approx(vmax));

  // fixed seed: identical parameters
  auto const again = train_nik(ds, arch, cfg);
  REQUIRE(again.parameters() == m.parameters());
  REQUIRE(again.hash() == m.hash());

  auto const csv = training_csv(log);
  REQUIRE(csv.rfind("epoch,loss,best\n", 0) == 0);

  TrainConfig bad = cfg;
  bad.lr = 1e9;
  bad.epochs = 3;
  REQUIRE_THROWS_AS(train_nik(ds, arch, bad), NumericError);
}

TEST_CASE("grid inference", "[nik]")
{
  auto arch = tiny_arch(2);
  NikModel m(arch);
  m.value_scale = 2.5;
  m.nav_min = -0.5;
  m.nav_max = 0.5;
  auto const g = infer_grid(m, 0.25, 8, 16);
  REQUIRE(g.coils.size() == 2);
  REQUIRE(g.coils[0].rows() == 8);
  REQUIRE(g.coils[0].cols() == 16);
  REQUIRE_FALSE(g.extrapolated);
  // pixel (row 1, col 3) sits at kx = -10/16, ky = -6/8
  std::vector<Coord3> v{{0.25, (3 - 8) * 2.0 / 16, (1 - 4) * 2.0 / 8}};
  auto const direct = m.forward(v);
  REQUIRE(std::abs(g.coils[1](1, 3) - direct[1]) < 1e-12);
  REQUIRE(infer_grid(m, 0.8, 8, 8).extrapolated);
  REQUIRE(infer_grid(m, -1.2, 8, 8).extrapolated);
}

TEST_CASE("coil combination", "[nik]")
{
  auto const coils = coil_maps_analytic(3, 16, 16);
  auto const img = phantom_image(EllipsePhantom::abdomen(), 0.0, 16, 16);
  std::vector<ComplexImage> grids;
  auto const grid = cartesian_grid(16, 16);
  for (int c = 0; c < 3; ++c) {
    ComplexImage ci(16, 16);
    for (std::size_t p = 0; p < ci.size(); ++p) { ci[p] = coils.maps[c][p] * img[p]; }
    auto const k = nudft_forward(ci, grid);
    ComplexImage kg(16, 16);
    std::copy(k.begin(), k.end(), kg.begin());
    grids.push_back(kg);
  }
  auto const rec = coil_combine_image(grids, coils);
  for (std::size_t p = 0; p < rec.size(); ++p) { REQUIRE(std::abs(rec[p] - img[p]) < 1e-10); }
  grids.pop_back();
  REQUIRE_THROWS_AS(coil_combine_image(grids, coils), DataError);
}
