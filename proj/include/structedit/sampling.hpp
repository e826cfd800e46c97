#pragma once

#include <cstdint>
#include <vector>

#include "structedit/shape.hpp"

namespace structedit {

using PointSet = std::vector<Vec3>;

// Deterministic sampler: the 6 faces of the box, each on an m x m grid
// (corners included). Point count is exactly 6*m*m.
PointSet sample_box_points(const Part& part, int grid_m);

// Unit-cube face grid for grid_m, cached per m. Points are on the faces of
// [-1,1]^3 in a fixed order.
const std::vector<Vec3>& unit_box_grid(int grid_m);

// Symmetric squared-distance Chamfer distance, averaged per side.
// Throws std::invalid_argument on an empty input.
double chamfer_distance(const PointSet& a, const PointSet& b);

inline constexpr int kMatchGridM = 4;  // 96 points per box

// Chamfer distance between deterministic box samplings; ignores semantics
// and children.
double box_distance(const Part& a, const Part& b, int grid_m = kMatchGridM);
double box_distance_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Random surface sampling over the LEAF boxes of a shape, n points total,
// faces chosen proportionally to surface area. Deterministic given seed.
// Throws std::runtime_error when the total surface area is zero.
PointSet sample_shape_points(const ShapeTree& shape, int n, std::uint64_t seed);

inline constexpr int kShapeSampleCount = 2048;

}  // namespace structedit
