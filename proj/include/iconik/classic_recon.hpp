#pragma once

#include "iconik/simulator.hpp"
#include "iconik/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace iconik {

using ImageSeries = std::vector<ComplexImage>;

struct DynamicImage
{
  ImageSeries states;
  std::vector<std::pair<double, double>> nav_ranges; // per state, (min, max)
  std::string method;
  std::string config_hash;

  int n_states() const { return static_cast<int>(states.size()); }
};

/// Density-compensated adjoint per coil, combined with conjugate coil maps.
DynamicImage inufft_recon(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils);

enum TvAxes : unsigned
{
  TvTemporal = 1u,
  TvSpatial = 2u,
  TvAll = 3u,
};

/// Smoothed total variation sum sqrt(|D x|^2 + mu) with forward differences,
/// circular along the state axis and replicate-padded along y and x. Spatial
/// differences are taken per axis (anisotropic).
double tv_value(ImageSeries const &x, double mu, unsigned axes = TvAll);

/// Gradient of tv_value, as dJ/dRe + i dJ/dIm per pixel.
ImageSeries tv_grad(ImageSeries const &x, double mu, unsigned axes = TvAll);

struct XDGraspConfig
{
  double lambda_spatial = 0.01;
  double lambda_temporal = 0.1;
  int n_iter = 40;
  double mu = 1e-7;
  // Armijo backtracking
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  int restart_every = 10;
  // lambdas are multiplied by max |x0| of the INUFFT initialization
  bool scale_by_initial_max = true;
  // data term weighted by the radial density compensation
  bool density_weighting = true;

  void validate() const;
};

struct XDGraspResult
{
  DynamicImage image;
  std::vector<double> objective; // entry 0 is the initialization
  double lambda_spatial = 0.0;   // absolute values actually used
  double lambda_temporal = 0.0;
  bool line_search_failed = false;
};

/// Minimizes sum_d ||W^(1/2) (F S x_d - y_d)||^2 + lt TV_t(x) + ls TV_s(x)
/// by Fletcher-Reeves nonlinear CG with Armijo backtracking, starting from
/// the INUFFT reconstruction.
XDGraspResult xdgrasp_recon(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, XDGraspConfig const &cfg);

/// Same as above from an explicit starting point; lambdas are absolute.
XDGraspResult xdgrasp_solve(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries x0,
                            double lambda_spatial, double lambda_temporal, XDGraspConfig const &cfg);

/// Objective as optimized by xdgrasp_recon (lambdas resolved the same way).
double objective_value(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries const &x,
                       XDGraspConfig const &cfg);

/// Objective and gradient with absolute lambdas.
double objective_with_gradient(std::vector<KSpaceDataset> const &bins, CoilMaps const &coils, ImageSeries const &x,
                               double lambda_spatial, double lambda_temporal, XDGraspConfig const &cfg,
                               ImageSeries *gradient);

std::string objective_csv(std::vector<double> const &objective);

} // namespace iconik
