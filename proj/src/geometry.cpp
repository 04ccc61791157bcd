#include "iconik/geometry.hpp"
#include "iconik/error.hpp"

#include <cmath>
#include <string>

namespace iconik {

Trajectory golden_angle_trajectory(int n_spokes, int n_fe)
{
  if (n_spokes < 1) { throw ConfigError("trajectory: n_spokes must be >= 1, got " + std::to_string(n_spokes)); }
  if (n_fe < 2 || n_fe % 2 != 0) {
    throw ConfigError("trajectory: n_fe must be even and >= 2, got " + std::to_string(n_fe));
  }

  Trajectory t;
  t.n_spokes = n_spokes;
  t.n_fe = n_fe;
  t.angles.resize(n_spokes);
  t.times.resize(n_spokes);
  t.coords.resize(static_cast<std::size_t>(n_spokes) * n_fe);
  for (int i = 0; i < n_spokes; ++i) {
    double const angle = std::fmod(i * kGoldenAngle, std::numbers::pi);
    t.angles[i] = angle;
    t.times[i] = i;
    double const c = std::cos(angle), s = std::sin(angle);
    for (int j = 0; j < n_fe; ++j) {
      double const r = spoke_radius(j, n_fe);
      // r == 0 must give an exact zero, not -0 * tiny
      t.coords[static_cast<std::size_t>(i) * n_fe + j] = (j == n_fe / 2) ? KPoint{0.0, 0.0} : KPoint{r * c, r * s};
    }
  }
  return t;
}

} // namespace iconik
