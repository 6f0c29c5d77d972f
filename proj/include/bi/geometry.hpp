#pragma once

#include <cmath>
#include <numbers>

namespace bi {

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int dim)
{
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

/// Surface area of the unit sphere S^{N-1} (= N * unit ball volume).
inline double unit_sphere_area(int dim) { return dim * unit_ball_volume(dim); }

} // namespace bi
