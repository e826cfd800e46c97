#pragma once

#include <utility>
#include <vector>

namespace structedit {

using CostMatrix = std::vector<std::vector<double>>;

// Minimal-cost one-to-one assignment of size min(n, m) for a rectangular
// cost matrix with finite non-negative entries. Among equal-cost optima the
// lexicographically smallest (row, col) pair list is returned, pairs sorted
// by row. Empty matrix yields an empty assignment.
std::vector<std::pair<int, int>> linear_assignment(const CostMatrix& cost);

double assignment_cost(const CostMatrix& cost,
                       const std::vector<std::pair<int, int>>& pairs);

}  // namespace structedit
