#include "iconik/nufft.hpp"
#include "iconik/error.hpp"
#include "iconik/parallel.hpp"
#include "iconik/simd/kernels.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

namespace iconik {

namespace {

void check_coords(std::span<KPoint const> coords)
{
  for (std::size_t m = 0; m < coords.size(); ++m) {
    if (!(std::abs(coords[m].kx) <= 1.0) || !(std::abs(coords[m].ky) <= 1.0)) {
      throw DataError("nudft: coordinate " + std::to_string(m) + " outside [-1, 1]");
    }
  }
}

// exp(-i pi k (n - N/2)) for n = 0..N-1
void phase_row(double k, int N, cdouble *out)
{
  double const half = N / 2;
  for (int n = 0; n < N; ++n) { out[n] = std::polar(1.0, -std::numbers::pi * k * (n - half)); }
}

void forward_range(std::span<ComplexImage const> images, std::span<KPoint const> coords, std::size_t lo, std::size_t hi,
                   cdouble *out)
{
  int const H = static_cast<int>(images[0].rows()), W = static_cast<int>(images[0].cols());
  std::size_t const ni = images.size();
  std::vector<cdouble> ex(W), ey(H);
  auto const &k = simd::kernels();
  for (std::size_t m = lo; m < hi; ++m) {
    phase_row(coords[m].kx, W, ex.data());
    phase_row(coords[m].ky, H, ey.data());
    for (std::size_t c = 0; c < ni; ++c) {
      cdouble acc = 0.0;
      for (int y = 0; y < H; ++y) { acc += ey[y] * k.cdot(images[c].row(y).data(), ex.data(), W); }
      out[m * ni + c] = acc;
    }
  }
}

void check_images(std::span<ComplexImage const> images)
{
  if (images.empty()) { throw DataError("nudft: no images"); }
  for (auto const &im : images) {
    if (!im.same_shape(images[0]) || im.empty()) { throw DataError("nudft: images differ in shape"); }
  }
}

} // namespace

std::vector<cdouble> nudft_forward(std::span<ComplexImage const> images, std::span<KPoint const> coords)
{
  check_images(images);
  check_coords(coords);
  std::vector<cdouble> out(coords.size() * images.size());
  parallel_for(0, coords.size(), [&](std::size_t lo, std::size_t hi) { forward_range(images, coords, lo, hi, out.data()); }, 16);
  return out;
}

std::vector<cdouble> nudft_forward_serial(std::span<ComplexImage const> images, std::span<KPoint const> coords)
{
  check_images(images);
  check_coords(coords);
  std::vector<cdouble> out(coords.size() * images.size());
  forward_range(images, coords, 0, coords.size(), out.data());
  return out;
}

std::vector<cdouble> nudft_forward(ComplexImage const &image, std::span<KPoint const> coords)
{
  return nudft_forward(std::span<ComplexImage const>(&image, 1), coords);
}

std::vector<ComplexImage> nudft_adjoint(std::span<cdouble const> values, int n_images, std::span<KPoint const> coords,
                                        std::span<double const> weights, int H, int W)
{
  check_coords(coords);
  if (n_images < 1 || values.size() != coords.size() * n_images) {
    throw DataError("nudft_adjoint: values must hold samples x images entries");
  }
  if (!weights.empty() && weights.size() != coords.size()) {
    throw DataError("nudft_adjoint: weight count does not match sample count");
  }
  std::vector<ComplexImage> images(n_images, ComplexImage(H, W));
  // Rows are partitioned across workers; each worker visits every sample in
  // the same order, so pixel sums do not depend on the worker count.
  parallel_for(0, H, [&](std::size_t y0, std::size_t y1) {
    auto const &k = simd::kernels();
    std::vector<cdouble> exc(W);
    double const half_h = H / 2;
    for (std::size_t m = 0; m < coords.size(); ++m) {
      double const w = weights.empty() ? 1.0 : weights[m];
      phase_row(coords[m].kx, W, exc.data());
      for (auto &e : exc) { e = std::conj(e); }
      for (std::size_t y = y0; y < y1; ++y) {
        cdouble const ey = std::polar(1.0, std::numbers::pi * coords[m].ky * (static_cast<double>(y) - half_h));
        for (int c = 0; c < n_images; ++c) {
          cdouble const alpha = w * values[m * n_images + c] * ey;
          k.caxpy(alpha, exc.data(), images[c].row(y).data(), W);
        }
      }
    }
  });
  return images;
}

ComplexImage nudft_adjoint(std::span<cdouble const> values, std::span<KPoint const> coords, std::span<double const> weights,
                           int H, int W)
{
  return std::move(nudft_adjoint(values, 1, coords, weights, H, W)[0]);
}

std::vector<double> radial_density_profile(int n_spokes, int n_fe)
{
  if (n_spokes < 1 || n_fe < 2 || n_fe % 2) { throw ConfigError("density weights: invalid trajectory size"); }
  double const dr = 2.0 / n_fe;
  std::vector<double> w(n_fe);
  for (int j = 0; j < n_fe; ++j) {
    double const r = std::abs(spoke_radius(j, n_fe));
    // annulus sector r*dr*(pi/n_spokes); the center disk of radius dr/2 is shared by all spokes
    double const area = (j == n_fe / 2) ? std::numbers::pi * dr * dr / (4.0 * n_spokes) : r * dr * std::numbers::pi / n_spokes;
    w[j] = area / 4.0;
  }
  return w;
}

DensityWeights radial_density_weights(Trajectory const &traj)
{
  auto const profile = radial_density_profile(traj.n_spokes, traj.n_fe);
  DensityWeights d;
  d.w.resize(traj.samples());
  for (int s = 0; s < traj.n_spokes; ++s) {
    for (int j = 0; j < traj.n_fe; ++j) { d.w[static_cast<std::size_t>(s) * traj.n_fe + j] = profile[j]; }
  }
  return d;
}

double nudft_grid_scale(int H, int W) { return std::sqrt(static_cast<double>(H) * W); }

namespace {

std::mutex &planner_mutex()
{
  static std::mutex m;
  return m;
}

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexImage centered_fft(ComplexImage const &in, int sign)
{
  std::size_t const H = in.rows(), W = in.cols();
  if (!is_pow2(H) || !is_pow2(W)) {
    throw ConfigError("fft2c: sizes must be powers of two, got " + std::to_string(H) + "x" + std::to_string(W));
  }
  // For even sizes fftshift == ifftshift: swap quadrants in, transform, swap out.
  ComplexImage buf(H, W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) { buf((y + H / 2) % H, (x + W / 2) % W) = in(y, x); }
  }
  auto *data = reinterpret_cast<fftw_complex *>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(H), static_cast<int>(W), data, data, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  double const scale = 1.0 / std::sqrt(static_cast<double>(H * W));
  ComplexImage out(H, W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) { out((y + H / 2) % H, (x + W / 2) % W) = buf(y, x) * scale; }
  }
  return out;
}

} // namespace

ComplexImage fft2c(ComplexImage const &image) { return centered_fft(image, FFTW_FORWARD); }
ComplexImage ifft2c(ComplexImage const &kspace) { return centered_fft(kspace, FFTW_BACKWARD); }

ComplexImage grid_to_image(ComplexImage const &kgrid)
{
  ComplexImage img = ifft2c(kgrid);
  double const s = 1.0 / nudft_grid_scale(static_cast<int>(kgrid.rows()), static_cast<int>(kgrid.cols()));
  for (auto &v : img) { v *= s; }
  return img;
}

std::vector<KPoint> cartesian_grid(int H, int W)
{
  std::vector<KPoint> g(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      g[static_cast<std::size_t>(y) * W + x] = {(x - W / 2) * 2.0 / W, (y - H / 2) * 2.0 / H};
    }
  }
  return g;
}

} // namespace iconik
