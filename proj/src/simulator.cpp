#include "iconik/simulator.hpp"
#include "iconik/error.hpp"
#include "iconik/nufft.hpp"
#include "iconik/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace iconik {

Ellipse displaced(Ellipse const &e, double nav)
{
  Ellipse d = e;
  d.cy = e.cy + e.m_t * nav;
  d.a = e.a * (1.0 + e.m_s * nav);
  d.b = e.b * (1.0 + e.m_s * nav);
  return d;
}

void EllipsePhantom::validate() const
{
  for (std::size_t i = 0; i < ellipses.size(); ++i) {
    auto const &e = ellipses[i];
    if (!(e.a > 0.0) || !(e.b > 0.0)) {
      throw ConfigError("phantom: ellipse " + std::to_string(i) + " has non-positive semi-axis");
    }
    // extent is affine in nav, so checking the two ends covers [-1, 1]
    for (double nav : {-1.0, 1.0}) {
      Ellipse const d = displaced(e, nav);
      if (!(d.a > 0.0) || !(d.b > 0.0)) {
        throw ConfigError("phantom: ellipse " + std::to_string(i) + " collapses under motion");
      }
      if (std::hypot(d.cx, d.cy) + std::max(d.a, d.b) > 1.0) {
        throw ConfigError("phantom: ellipse " + std::to_string(i) + " leaves the field of view at nav=" +
                          std::to_string(nav));
      }
    }
  }
}

EllipsePhantom EllipsePhantom::abdomen()
{
  EllipsePhantom p;
  //                 cx     cy     a      b      angle  amp    m_t    m_s
  p.ellipses = {
    {0.00, 0.00, 0.85, 0.62, 0.00, {0.35, 0.0}, 0.00, 0.02},  // torso
    {-0.30, -0.05, 0.35, 0.28, 0.30, {0.45, 0.0}, 0.08, 0.03}, // liver
    {0.40, -0.10, 0.20, 0.14, -0.40, {0.30, 0.0}, 0.06, 0.02}, // spleen
    {0.32, 0.27, 0.09, 0.15, 0.20, {0.35, 0.0}, 0.05, 0.00},   // kidney
    {-0.28, 0.32, 0.09, 0.14, -0.20, {0.35, 0.0}, 0.05, 0.00}, // kidney
    {0.00, 0.42, 0.07, 0.07, 0.00, {0.55, 0.0}, 0.00, 0.00},   // spine
    {-0.36, -0.06, 0.035, 0.035, 0.00, {0.40, 0.0}, 0.08, 0.00}, // hepatic vessel
    {-0.18, -0.16, 0.025, 0.025, 0.00, {0.40, 0.0}, 0.08, 0.00}, // hepatic vessel
  };
  return p;
}

namespace {

struct EllipseTest
{
  double cx, cy, c, s, inv_a2, inv_b2;
  cdouble amp;
  explicit EllipseTest(Ellipse const &d)
    : cx(d.cx), cy(d.cy), c(std::cos(d.angle)), s(std::sin(d.angle)), inv_a2(1.0 / (d.a * d.a)),
      inv_b2(1.0 / (d.b * d.b)), amp(d.amplitude)
  {
  }
  bool inside(double ux, double uy) const
  {
    double const dx = ux - cx, dy = uy - cy;
    double const xr = dx * c + dy * s;
    double const yr = -dx * s + dy * c;
    return xr * xr * inv_a2 + yr * yr * inv_b2 <= 1.0;
  }
};

template <class Fn>
void rasterize(EllipsePhantom const &phantom, double nav, int H, int W, Fn &&accumulate)
{
  std::vector<EllipseTest> tests;
  for (auto const &e : phantom.ellipses) { tests.emplace_back(displaced(e, nav)); }
  double const hx = 2.0 / W, hy = 2.0 / H;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double const ux = (x - W / 2) * hx, uy = (y - H / 2) * hy;
      for (std::size_t e = 0; e < tests.size(); ++e) {
        int hits = 0;
        for (double oy : {-0.25, 0.25}) {
          for (double ox : {-0.25, 0.25}) { hits += tests[e].inside(ux + ox * hx, uy + oy * hy); }
        }
        if (hits) { accumulate(y, x, e, hits * 0.25); }
      }
    }
  }
}

void check_image_size(int H, int W)
{
  if (H < 8 || W < 8) { throw ConfigError("phantom_image: H and W must be >= 8"); }
}

} // namespace

ComplexImage phantom_image(EllipsePhantom const &phantom, double nav, int H, int W)
{
  check_image_size(H, W);
  ComplexImage img(H, W);
  rasterize(phantom, nav, H, W, [&](int y, int x, std::size_t e, double frac) {
    img(y, x) += frac * phantom.ellipses[e].amplitude;
  });
  return img;
}

RealImage support_mask(EllipsePhantom const &phantom, double nav, int H, int W)
{
  check_image_size(H, W);
  RealImage mask(H, W);
  rasterize(phantom, nav, H, W, [&](int y, int x, std::size_t, double frac) { mask(y, x) = std::max(mask(y, x), frac); });
  return mask;
}

cdouble ellipse_fourier(Ellipse const &e, double fx, double fy, double nav)
{
  Ellipse const d = displaced(e, nav);
  double const c = std::cos(d.angle), s = std::sin(d.angle);
  double const fr = fx * c + fy * s;
  double const fi = -fx * s + fy * c;
  double const rho = std::hypot(d.a * fr, d.b * fi);
  // jinc(rho) = 2 J1(2 pi rho) / (2 pi rho), jinc(0) = 1
  double jinc = 1.0;
  if (rho > 1e-12) {
    double const arg = 2.0 * std::numbers::pi * rho;
    jinc = 2.0 * std::cyl_bessel_j(1.0, arg) / arg;
  }
  double const phase = -2.0 * std::numbers::pi * (fx * d.cx + fy * d.cy);
  return d.amplitude * (std::numbers::pi * d.a * d.b * jinc) * std::polar(1.0, phase);
}

cdouble analytic_ellipse_kspace(Ellipse const &e, KPoint k, double nav, int H, int W)
{
  return (0.25 * H * W) * ellipse_fourier(e, k.kx * W / 4.0, k.ky * H / 4.0, nav);
}

CoilMaps coil_maps_analytic(int n_c, int H, int W)
{
  if (n_c < 1) { throw ConfigError("coil maps: n_c must be >= 1"); }
  CoilMaps cm;
  cm.n_c = n_c;
  cm.H = H;
  cm.W = W;
  cm.maps.assign(n_c, ComplexImage(H, W));
  double const ring = 1.2, width = 0.9;
  for (int c = 0; c < n_c; ++c) {
    double const phi = 2.0 * std::numbers::pi * c / n_c;
    double const px = ring * std::cos(phi), py = ring * std::sin(phi);
    // phase ramp direction rotates with the coil position
    double const gx = 0.6 * std::cos(phi + 0.7), gy = 0.6 * std::sin(phi + 0.7);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double const ux = (x - W / 2) * 2.0 / W, uy = (y - H / 2) * 2.0 / H;
        double const d2 = (ux - px) * (ux - px) + (uy - py) * (uy - py);
        double const mag = std::exp(-d2 / (2.0 * width * width));
        cm.maps[c](y, x) = std::polar(mag, gx * ux + gy * uy + phi);
      }
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double ss = 0.0;
      for (int c = 0; c < n_c; ++c) { ss += std::norm(cm.maps[c](y, x)); }
      double const inv = 1.0 / std::sqrt(ss);
      for (int c = 0; c < n_c; ++c) { cm.maps[c](y, x) *= inv; }
    }
  }
  return cm;
}

double MotionModel::operator()(double t) const
{
  double const v = amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase) + drift * t;
  return std::clamp(v, -1.0, 1.0);
}

MotionModel MotionModel::stationary() { return MotionModel{.amplitude = 0.0, .period = 1.0, .phase = 0.0, .drift = 0.0}; }

std::vector<KPoint> KSpaceDataset::kpoints() const
{
  std::vector<KPoint> out(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) { out[i] = {coords[i].kx, coords[i].ky}; }
  return out;
}

void KSpaceDataset::validate() const
{
  auto const n = static_cast<std::size_t>(meta.n_spokes) * meta.n_fe;
  if (meta.n_fe < 2 || meta.n_c < 1 || meta.n_spokes < 0) { throw DataError("dataset: invalid header counts"); }
  if (coords.size() != n) { throw DataError("dataset: coordinate count does not match n_spokes * n_fe"); }
  if (values.size() != n * meta.n_c) { throw DataError("dataset: value count does not match samples * n_c"); }
  if (spoke_ids.size() != static_cast<std::size_t>(meta.n_spokes)) { throw DataError("dataset: spoke id count mismatch"); }
  if (!gt_nav.empty() && gt_nav.size() != static_cast<std::size_t>(meta.n_spokes)) {
    throw DataError("dataset: ground-truth navigator length mismatch");
  }
  for (int s = 0; s < meta.n_spokes; ++s) {
    double const nav = coords[static_cast<std::size_t>(s) * meta.n_fe].nav;
    for (int j = 0; j < meta.n_fe; ++j) {
      auto const &c = coords[static_cast<std::size_t>(s) * meta.n_fe + j];
      if (c.nav != nav) { throw DataError("dataset: spoke " + std::to_string(s) + " carries more than one nav value"); }
      if (!(c.nav >= -1.0 && c.nav <= 1.0) || !(std::abs(c.kx) <= 1.0) || !(std::abs(c.ky) <= 1.0)) {
        throw DataError("dataset: coordinate out of range in spoke " + std::to_string(s));
      }
    }
  }
}

KSpaceDataset simulate_acquisition(EllipsePhantom const &phantom, MotionModel const &motion, CoilMaps const &coils,
                                   Trajectory const &traj, double noise_std, std::uint64_t seed)
{
  phantom.validate();
  if (coils.n_c < 1 || coils.maps.size() != static_cast<std::size_t>(coils.n_c)) {
    throw DataError("simulate: coil maps are empty or inconsistent");
  }
  if (coils.H != coils.W || coils.W != traj.n_fe) {
    throw DataError("simulate: coil grid " + std::to_string(coils.H) + "x" + std::to_string(coils.W) +
                    " does not match trajectory n_fe " + std::to_string(traj.n_fe));
  }
  int const H = coils.H, W = coils.W, nc = coils.n_c, nfe = traj.n_fe;

  KSpaceDataset ds;
  ds.meta = DatasetMeta{.n_spokes = traj.n_spokes, .n_fe = nfe, .n_c = nc, .H = H, .W = W, .noise_std = 0.0,
                        .provenance = "simulated", .phantom = {}};
  ds.coords.resize(traj.samples());
  ds.values.resize(traj.samples() * nc);
  ds.spoke_ids.resize(traj.n_spokes);
  ds.gt_nav.resize(traj.n_spokes);

  parallel_for(0, traj.n_spokes, [&](std::size_t lo, std::size_t hi) {
    std::vector<ComplexImage> coil_images(nc, ComplexImage(H, W));
    for (std::size_t s = lo; s < hi; ++s) {
      double const nav = motion(traj.times[s]);
      ds.gt_nav[s] = nav;
      ds.spoke_ids[s] = static_cast<int>(s);
      ComplexImage const img = phantom_image(phantom, nav, H, W);
      for (int c = 0; c < nc; ++c) {
        for (std::size_t p = 0; p < img.size(); ++p) { coil_images[c][p] = img[p] * coils.maps[c][p]; }
      }
      std::span<KPoint const> spoke(traj.coords.data() + s * nfe, nfe);
      std::vector<cdouble> const vals = nudft_forward_serial(coil_images, spoke);
      for (int j = 0; j < nfe; ++j) {
        std::size_t const i = s * nfe + j;
        ds.coords[i] = {nav, spoke[j].kx, spoke[j].ky};
        for (int c = 0; c < nc; ++c) { ds.values[i * nc + c] = cfloat(vals[static_cast<std::size_t>(j) * nc + c]); }
      }
    }
  });

  if (noise_std > 0.0) { add_noise(ds, noise_std, seed); }
  return ds;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
} // namespace

void add_noise(KSpaceDataset &ds, double noise_std, std::uint64_t seed)
{
  if (noise_std < 0.0) { throw ConfigError("noise_std must be >= 0"); }
  if (noise_std == 0.0) { return; }
  int const nfe = ds.meta.n_fe, nc = ds.meta.n_c;
  double const component = noise_std / std::sqrt(2.0);
  for (int s = 0; s < ds.meta.n_spokes; ++s) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ds.spoke_ids[s]) + 1)));
    std::normal_distribution<double> gauss(0.0, component);
    for (int j = 0; j < nfe; ++j) {
      for (int c = 0; c < nc; ++c) {
        auto &v = ds.values[(static_cast<std::size_t>(s) * nfe + j) * nc + c];
        double const re = gauss(rng);
        double const im = gauss(rng);
        v = cfloat(static_cast<float>(v.real() + re), static_cast<float>(v.imag() + im));
      }
    }
  }
  ds.meta.noise_std = std::hypot(ds.meta.noise_std, noise_std);
}

double mean_center_magnitude(KSpaceDataset const &ds)
{
  int const nfe = ds.meta.n_fe, nc = ds.meta.n_c;
  double sum = 0.0;
  std::size_t count = 0;
  for (int s = 0; s < ds.meta.n_spokes; ++s) {
    std::size_t const i = static_cast<std::size_t>(s) * nfe + nfe / 2;
    for (int c = 0; c < nc; ++c) {
      sum += std::abs(ds.value(i, c));
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

void set_navigator(KSpaceDataset &ds, std::vector<double> const &nav_per_spoke)
{
  if (nav_per_spoke.size() != static_cast<std::size_t>(ds.meta.n_spokes)) {
    throw DataError("set_navigator: expected one value per spoke");
  }
  for (int s = 0; s < ds.meta.n_spokes; ++s) {
    for (int j = 0; j < ds.meta.n_fe; ++j) { ds.coords[static_cast<std::size_t>(s) * ds.meta.n_fe + j].nav = nav_per_spoke[s]; }
  }
}

} // namespace iconik
