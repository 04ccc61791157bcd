#pragma once

// Exact non-uniform DFT on a centered pixel grid plus the Cartesian FFT pair.
//
// Forward:  y(k) = sum_p x(p) exp(-i pi (kx (px - W/2) + ky (py - H/2)))
// so k = 2u/N for integer u lands exactly on the centered DFT frequency u.
// The forward sum is unnormalized (a centered unit impulse maps to 1 at every
// k), while fft2c/ifft2c are unitary. On grid coordinates the two therefore
// differ by the factor sqrt(H*W); see nudft_grid_scale().

#include "iconik/geometry.hpp"
#include "iconik/types.hpp"

#include <span>
#include <vector>

namespace iconik {

struct DensityWeights
{
  std::vector<double> w;
};

std::vector<cdouble> nudft_forward(ComplexImage const &image, std::span<KPoint const> coords);

/// Several images sharing one set of coordinates. Output is samples x images.
std::vector<cdouble> nudft_forward(std::span<ComplexImage const> images, std::span<KPoint const> coords);

/// Single-threaded variant for callers that parallelize at a coarser level.
std::vector<cdouble> nudft_forward_serial(std::span<ComplexImage const> images, std::span<KPoint const> coords);

/// image(p) = sum_m w_m y_m exp(+i ...). Empty weights mean w_m = 1.
ComplexImage nudft_adjoint(std::span<cdouble const> values, std::span<KPoint const> coords,
                           std::span<double const> weights, int H, int W);

/// values is samples x n_images (as produced by the multi-image forward).
std::vector<ComplexImage> nudft_adjoint(std::span<cdouble const> values, int n_images, std::span<KPoint const> coords,
                                        std::span<double const> weights, int H, int W);

/// Ramp weights equal to the k-space area each sample represents divided by
/// the area of the full [-1,1)^2 grid cell budget, so the weighted adjoint
/// approximates the inverse transform in image units.
DensityWeights radial_density_weights(Trajectory const &traj);

/// The per-sample pattern of one spoke for a set of n_spokes spokes.
std::vector<double> radial_density_profile(int n_spokes, int n_fe);

double nudft_grid_scale(int H, int W);

/// Unitary centered transforms; H and W must be powers of two.
ComplexImage fft2c(ComplexImage const &image);
ComplexImage ifft2c(ComplexImage const &kspace);

/// Inverse of nudft_forward sampled on the Cartesian grid: ifft2c / sqrt(HW).
ComplexImage grid_to_image(ComplexImage const &kgrid);

/// Coordinates of the Cartesian grid matching nudft_forward, row-major.
std::vector<KPoint> cartesian_grid(int H, int W);

} // namespace iconik
