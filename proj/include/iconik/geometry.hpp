#pragma once

#include "iconik/types.hpp"

#include <cstddef>
#include <numbers>
#include <vector>

namespace iconik {

/// Golden-angle increment 180 deg / phi, in radians.
inline constexpr double kGoldenAngle = std::numbers::pi / std::numbers::phi;

/// Full-diameter golden-angle radial sampling of one 2D slice.
///
/// Sample j on spoke i sits at radius (j - n_fe/2) / (n_fe/2) along
/// (cos angle_i, sin angle_i), so sample n_fe/2 is the k-space center and the
/// radial step is 2/n_fe, one Cartesian cell of an n_fe grid.
struct Trajectory
{
  int n_spokes = 0;
  int n_fe = 0;
  std::vector<double> angles; // per spoke, radians in [0, pi)
  std::vector<double> times;  // per spoke, in spoke units
  std::vector<KPoint> coords; // n_spokes * n_fe, spoke-major

  std::size_t samples() const { return coords.size(); }
  KPoint const &at(int spoke, int sample) const { return coords[static_cast<std::size_t>(spoke) * n_fe + sample]; }
  int center_index() const { return n_fe / 2; }
};

/// Signed radius of sample j on a spoke with n_fe samples.
inline double spoke_radius(int j, int n_fe) { return static_cast<double>(j - n_fe / 2) / (n_fe / 2); }

Trajectory golden_angle_trajectory(int n_spokes, int n_fe);

} // namespace iconik
