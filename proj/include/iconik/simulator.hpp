#pragma once

#include "iconik/geometry.hpp"
#include "iconik/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace iconik {

/// Image-space convention: pixel (row y, col x) of an H x W image sits at
/// u = ((x - W/2) / (W/2), (y - H/2) / (H/2)), so the FOV spans [-1, 1).
struct Ellipse
{
  double cx = 0.0;
  double cy = 0.0;
  double a = 0.1;     // semi-axis along the rotated x axis
  double b = 0.1;     // semi-axis along the rotated y axis
  double angle = 0.0; // radians, counter-clockwise
  cdouble amplitude{1.0, 0.0};
  double m_t = 0.0; // y translation per unit nav
  double m_s = 0.0; // relative axis scaling per unit nav
};

/// Ellipse after applying the motion state nav.
Ellipse displaced(Ellipse const &e, double nav);

struct EllipsePhantom
{
  std::vector<Ellipse> ellipses;

  /// Throws ConfigError unless every ellipse stays inside the FOV for all
  /// nav in [-1, 1] and all semi-axes are positive.
  void validate() const;

  /// Torso-like arrangement with a liver/kidney/vessel set moving along y.
  static EllipsePhantom abdomen();
};

RealImage support_mask(EllipsePhantom const &phantom, double nav, int H, int W);

/// 2x supersampled rasterization, box-downsampled.
ComplexImage phantom_image(EllipsePhantom const &phantom, double nav, int H, int W);

/// Continuous Fourier transform of the displaced ellipse indicator,
/// integral of f(u) exp(-2 pi i f.u) du with (fx, fy) in cycles per unit of u.
cdouble ellipse_fourier(Ellipse const &e, double fx, double fy, double nav);

/// The same transform expressed in the units of nudft_forward on an H x W grid:
/// k in [-1, 1) maps to f = k * (W/4, H/4) and the value scales by H*W/4,
/// the inverse pixel area.
cdouble analytic_ellipse_kspace(Ellipse const &e, KPoint k, double nav, int H, int W);

struct CoilMaps
{
  int n_c = 0;
  int H = 0;
  int W = 0;
  std::vector<ComplexImage> maps;
};

/// Gaussian lobes on a ring around the FOV with per-coil linear phase,
/// normalized so sum_c |S_c|^2 = 1 at every pixel.
CoilMaps coil_maps_analytic(int n_c, int H, int W);

/// nav(t) = clamp(amplitude * sin(2 pi t / period + phase) + drift * t, -1, 1)
struct MotionModel
{
  double amplitude = 1.0;
  double period = 60.0; // spokes
  double phase = 0.0;
  double drift = 0.0;

  double operator()(double t) const;
  static MotionModel stationary();
};

struct DatasetMeta
{
  int n_spokes = 0;
  int n_fe = 0;
  int n_c = 0;
  int H = 0;
  int W = 0;
  double noise_std = 0.0;
  std::string provenance;
  std::string phantom; // serialized phantom description, optional
};

/// Measured samples v_i = (nav_i, kx_i, ky_i) with n_c complex values each.
/// Spoke s occupies samples [s * n_fe, (s + 1) * n_fe).
struct KSpaceDataset
{
  DatasetMeta meta;
  std::vector<Coord3> coords;
  std::vector<cfloat> values;  // samples x n_c
  std::vector<int> spoke_ids;  // original spoke index of each stored spoke
  std::vector<double> gt_nav;  // per stored spoke; empty if unknown

  std::size_t samples() const { return coords.size(); }
  cfloat value(std::size_t i, int c) const { return values[i * meta.n_c + c]; }
  KPoint k(std::size_t i) const { return {coords[i].kx, coords[i].ky}; }
  std::vector<KPoint> kpoints() const;
  bool has_ground_truth() const { return !gt_nav.empty(); }

  /// Throws DataError if counts or ranges are inconsistent.
  void validate() const;
};

/// Noise-free acquisition followed by add_noise(noise_std, seed).
KSpaceDataset simulate_acquisition(EllipsePhantom const &phantom, MotionModel const &motion, CoilMaps const &coils,
                                   Trajectory const &traj, double noise_std, std::uint64_t seed);

/// Adds circular complex Gaussian noise with E|n|^2 = noise_std^2. Each spoke
/// draws from its own stream seeded by (seed, spoke id).
void add_noise(KSpaceDataset &ds, double noise_std, std::uint64_t seed);

/// Mean magnitude of the k = 0 samples over spokes and coils.
double mean_center_magnitude(KSpaceDataset const &ds);

/// Replaces the per-spoke nav coordinate.
void set_navigator(KSpaceDataset &ds, std::vector<double> const &nav_per_spoke);

} // namespace iconik
