#include "structedit/sampling.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace structedit {

namespace {

// Fixed face order: +x, -x, +y, -y, +z, -z; row-major (u, v) grid per face.
std::vector<Vec3> make_unit_grid(int m) {
  std::vector<Vec3> pts;
  pts.reserve(size_t(6) * m * m);
  auto coord = [m](int i) { return -1.0 + 2.0 * double(i) / double(m - 1); };
  for (int face = 0; face < 6; ++face) {
    int axis = face / 2;
    double sign = (face % 2 == 0) ? 1.0 : -1.0;
    for (int iu = 0; iu < m; ++iu) {
      for (int iv = 0; iv < m; ++iv) {
        double u = coord(iu), v = coord(iv);
        Vec3 p;
        if (axis == 0) p = {sign, u, v};
        else if (axis == 1) p = {u, sign, v};
        else p = {u, v, sign};
        pts.push_back(p);
      }
    }
  }
  return pts;
}

// Minimal static kd-tree for nearest-neighbor queries inside the Chamfer
// distance. Brute force stays the oracle in tests.
class KdTree {
 public:
  explicit KdTree(const PointSet& pts) : pts_(pts) {
    idx_.resize(pts.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.reserve(pts.size() * 2);
    root_ = build(0, int(pts.size()));
  }

  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
  }

 private:
  struct Node {
    int begin, end;    // leaf range into idx_
    int left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end) {
    Node n;
    n.begin = begin;
    n.end = end;
    if (end - begin > 8) {
      Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
      for (int i = begin; i < end; ++i) {
        const Vec3& p = pts_[idx_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
      }
      Vec3 ext = hi - lo;
      int axis = 0;
      if (ext.y > ext.x) axis = 1;
      if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;
      int mid = (begin + end) / 2;
      auto key = [this, axis](int i) {
        const Vec3& p = pts_[i];
        return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
      };
      std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                       [&](int a, int b) { return key(a) < key(b); });
      n.axis = axis;
      n.split = key(idx_[mid]);
      nodes_.push_back(n);
      int self = int(nodes_.size()) - 1;
      int l = build(begin, mid);
      int r = build(mid, end);
      nodes_[self].left = l;
      nodes_[self].right = r;
      return self;
    }
    nodes_.push_back(n);
    return int(nodes_.size()) - 1;
  }

  void search(int ni, const Vec3& q, double& best) const {
    const Node& n = nodes_[ni];
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i)
        best = std::min(best, squared_distance(q, pts_[idx_[i]]));
      return;
    }
    double qc = n.axis == 0 ? q.x : (n.axis == 1 ? q.y : q.z);
    double d = qc - n.split;
    int first = d < 0.0 ? n.left : n.right;
    int second = d < 0.0 ? n.right : n.left;
    search(first, q, best);
    if (d * d < best) search(second, q, best);
  }

  const PointSet& pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_;
};

double brute_min_sq(const Vec3& q, const PointSet& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : pts) best = std::min(best, squared_distance(q, p));
  return best;
}

}  // namespace

const std::vector<Vec3>& unit_box_grid(int grid_m) {
  static std::map<int, std::vector<Vec3>> cache;
  auto it = cache.find(grid_m);
  if (it == cache.end()) it = cache.emplace(grid_m, make_unit_grid(grid_m)).first;
  return it->second;
}

PointSet sample_box_points(const Part& part, int grid_m) {
  if (grid_m < 2) throw std::invalid_argument("grid_m must be >= 2");
  const auto& grid = unit_box_grid(grid_m);
  PointSet out;
  out.reserve(grid.size());
  for (const Vec3& u : grid)
    out.push_back(part.center + part.orientation.rotate(u.cwise(part.extents)));
  return out;
}

double chamfer_distance(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty point set");
  double sum_ab = 0.0, sum_ba = 0.0;
  if (a.size() <= 128 && b.size() <= 128) {
    for (const Vec3& p : a) sum_ab += brute_min_sq(p, b);
    for (const Vec3& p : b) sum_ba += brute_min_sq(p, a);
  } else {
    KdTree ta(a), tb(b);
    for (const Vec3& p : a) sum_ab += tb.nearest_sq(p);
    for (const Vec3& p : b) sum_ba += ta.nearest_sq(p);
  }
  return sum_ab / double(a.size()) + sum_ba / double(b.size());
}

double box_distance(const Part& a, const Part& b, int grid_m) {
  return chamfer_distance(sample_box_points(a, grid_m), sample_box_points(b, grid_m));
}

double box_distance_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  return chamfer_distance(a, b);
}

PointSet sample_shape_points(const ShapeTree& shape, int n, std::uint64_t seed) {
  auto flat = flatten(shape.root);
  auto leaves = leaf_ids(flat);
  if (leaves.empty()) throw std::runtime_error("shape has no leaf parts");

  // One entry per (leaf, face); face areas of a box with half-extents r.
  struct Face {
    const Part* part;
    int axis;
    double sign;
  };
  std::vector<Face> faces;
  std::vector<double> cum;
  double total = 0.0;
  for (int id : leaves) {
    const Part* p = flat[id].part;
    const Vec3& r = p->extents;
    double area[3] = {4.0 * r.y * r.z, 4.0 * r.x * r.z, 4.0 * r.x * r.y};
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {1.0, -1.0}) {
        faces.push_back({p, axis, sign});
        total += area[axis];
        cum.push_back(total);
      }
    }
  }
  if (total <= 0.0) throw std::runtime_error("shape has zero total surface area");

  Rng rng(seed);
  PointSet out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double t = rng.uniform() * total;
    size_t fi = size_t(std::lower_bound(cum.begin(), cum.end(), t) - cum.begin());
    if (fi >= faces.size()) fi = faces.size() - 1;
    const Face& f = faces[fi];
    double u = rng.uniform(-1.0, 1.0);
    double v = rng.uniform(-1.0, 1.0);
    Vec3 unit;
    if (f.axis == 0) unit = {f.sign, u, v};
    else if (f.axis == 1) unit = {u, f.sign, v};
    else unit = {u, v, f.sign};
    out.push_back(f.part->center +
                  f.part->orientation.rotate(unit.cwise(f.part->extents)));
  }
  return out;
}

}  // namespace structedit
