#include "structedit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace structedit {

namespace {

// Classic O(n^3) Hungarian with potentials on a square matrix; returns the
// optimal total cost, and per-row column assignment in `rowsol`.
double hungarian_square(const CostMatrix& cost, std::vector<int>& rowsol) {
  int n = int(cost.size());
  rowsol.assign(n, -1);
  if (n == 0) return 0.0;
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) {
      rowsol[p[j] - 1] = j - 1;
      total += cost[p[j] - 1][j - 1];
    }
  }
  return total;
}

// Optimal cost of assigning min(rows, cols) pairs among the listed
// rows/cols. Rectangular matrices are padded to square with zeros.
double optimal_cost(const CostMatrix& cost, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
  int n = int(rows.size()), m = int(cols.size());
  if (n == 0 || m == 0) return 0.0;
  int s = std::max(n, m);
  CostMatrix sq(s, std::vector<double>(s, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) sq[i][j] = cost[rows[i]][cols[j]];
  std::vector<int> rowsol;
  double total = hungarian_square(sq, rowsol);
  // dummy entries are zero, so the padded total equals the real total
  return total;
}

}  // namespace

std::vector<std::pair<int, int>> linear_assignment(const CostMatrix& cost) {
  int n = int(cost.size());
  int m = n > 0 ? int(cost[0].size()) : 0;
  if (n == 0 || m == 0) return {};
  for (const auto& row : cost) {
    if (int(row.size()) != m) throw std::invalid_argument("ragged cost matrix");
    for (double c : row)
      if (!(c >= 0.0) || !std::isfinite(c))
        throw std::invalid_argument("cost matrix entries must be finite and non-negative");
  }

  std::vector<int> all_rows(n), all_cols(m);
  for (int i = 0; i < n; ++i) all_rows[i] = i;
  for (int j = 0; j < m; ++j) all_cols[j] = j;
  double best = optimal_cost(cost, all_rows, all_cols);

  // Fix pairs row by row, smallest feasible column first; this yields the
  // lexicographically smallest optimal pair list.
  int target = std::min(n, m);
  std::vector<std::pair<int, int>> pairs;
  std::vector<char> col_used(m, 0);
  double fixed = 0.0;
  std::vector<int> rem_rows = all_rows;
  for (int i = 0; i < n && int(pairs.size()) < target; ++i) {
    rem_rows.erase(std::find(rem_rows.begin(), rem_rows.end(), i));
    std::vector<int> rem_cols;
    for (int j = 0; j < m; ++j)
      if (!col_used[j]) rem_cols.push_back(j);
    double tol = 1e-9 * std::max(1.0, std::abs(best));
    bool assigned = false;
    for (int j : rem_cols) {
      std::vector<int> rc;
      for (int c : rem_cols)
        if (c != j) rc.push_back(c);
      double rest = optimal_cost(cost, rem_rows, rc);
      if (fixed + cost[i][j] + rest <= best + tol) {
        pairs.emplace_back(i, j);
        col_used[j] = 1;
        fixed += cost[i][j];
        assigned = true;
        break;
      }
    }
    if (!assigned) {
      // only possible when rows outnumber columns; row i stays unmatched
      continue;
    }
  }
  return pairs;
}

double assignment_cost(const CostMatrix& cost,
                       const std::vector<std::pair<int, int>>& pairs) {
  double total = 0.0;
  for (auto [i, j] : pairs) total += cost[i][j];
  return total;
}

}  // namespace structedit
