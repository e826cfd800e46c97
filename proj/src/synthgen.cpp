#include "structedit/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace structedit {
namespace synth {

std::string subtype_name(Subtype s) {
  switch (s) {
    case Subtype::Chair: return "chair";
    case Subtype::Sofa: return "sofa";
    case Subtype::Stool: return "stool";
  }
  return "chair";
}

Subtype subtype_from_name(const std::string& name) {
  if (name == "chair") return Subtype::Chair;
  if (name == "sofa") return Subtype::Sofa;
  if (name == "stool") return Subtype::Stool;
  throw std::invalid_argument("unknown subtype: " + name);
}

VariantIndex VariantIndex::from_flat(int flat) {
  if (flat < 0 || flat >= kVariantCount)
    throw std::out_of_range("variant flat index out of range");
  VariantIndex v;
  v.back = flat / 24;
  v.legs = (flat / 12) % 2;
  v.arms = (flat / 4) % 3;
  v.stretcher = flat % 4;
  return v;
}

std::array<bool, kVariantAxisCount> axis_mask(Subtype subtype) {
  switch (subtype) {
    case Subtype::Chair: return {true, true, true, true};
    case Subtype::Sofa: return {true, false, true, false};   // no leg base
    case Subtype::Stool: return {false, true, false, true};  // no back, no arms
  }
  return {true, true, true, true};
}

std::shared_ptr<const Taxonomy> synthetic_taxonomy() {
  static const std::shared_ptr<const Taxonomy> tax = [] {
    auto t = std::make_shared<Taxonomy>();
    t->labels = {"shape", "back", "back_surface", "back_bar", "seat",
                 "arm",   "arm_rest", "arm_support", "base", "leg", "stretcher"};
    t->children_of = {
        {"shape", {"back", "seat", "arm", "base"}},
        {"back", {"back_surface", "back_bar"}},
        {"back_surface", {}},
        {"back_bar", {}},
        {"seat", {}},
        {"arm", {"arm_rest", "arm_support"}},
        {"arm_rest", {}},
        {"arm_support", {}},
        {"base", {"leg", "stretcher"}},
        {"leg", {}},
        {"stretcher", {}},
    };
    return t;
  }();
  return tax;
}

GlobalParams sample_global_params(std::uint64_t seed) {
  Rng rng(combine_seed(seed, fnv1a("global_params")));
  GlobalParams p;
  p.w_leg = rng.uniform(0.04, 0.1);
  p.h_leg = rng.uniform(0.3, 1.2);
  p.w_seat = rng.uniform(0.8, 1.6);
  p.d_seat = rng.uniform(0.8, 1.6);
  p.h_seat = rng.uniform(0.3, 1.2);
  p.h_back = rng.uniform(0.3, 1.2);
  p.w_back = rng.uniform(0.8, 1.6);
  p.d_back = rng.uniform(0.04, 0.1);
  return p;
}

namespace {

inline constexpr double kStretcherHeight = 0.03;  // full bar height
inline constexpr double kSeatThicknessScale = 0.15;
inline constexpr double kShortLegScale = 0.6;
inline constexpr double kBarWidthScale = 0.05;   // of w_back
inline constexpr double kBarHeightScale = 0.1;   // of h_back

Part leaf(const std::string& label, Vec3 center, Vec3 full_size,
          Quat q = Quat::identity()) {
  Part p;
  p.semantic = label;
  p.center = center;
  p.orientation = q.canonical();
  p.extents = full_size * 0.5;
  return p;
}

void collect_corners(const Part& p, std::vector<Vec3>& out) {
  if (p.is_leaf()) {
    for (int i = 0; i < 8; ++i) {
      Vec3 s{(i & 1) ? p.extents.x : -p.extents.x,
             (i & 2) ? p.extents.y : -p.extents.y,
             (i & 4) ? p.extents.z : -p.extents.z};
      out.push_back(p.center + p.orientation.rotate(s));
    }
  }
  for (const Part& c : p.children) collect_corners(c, out);
}

// container box = AABB of descendant leaf corners
void fit_container_box(Part& p) {
  for (Part& c : p.children) fit_container_box(c);
  if (p.is_leaf()) return;
  std::vector<Vec3> corners;
  collect_corners(p, corners);
  Vec3 lo = corners[0], hi = corners[0];
  for (const Vec3& v : corners) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  p.center = (lo + hi) * 0.5;
  p.orientation = Quat::identity();
  p.extents = (hi - lo) * 0.5;
}

void transform_tree(Part& p, const Vec3& translate, double scale) {
  p.center = (p.center + translate) * scale;
  p.extents = p.extents * scale;
  for (Part& c : p.children) transform_tree(c, translate, scale);
}

Part build_back(const GlobalParams& gp, int variant, double seat_top) {
  Part back;
  back.semantic = "back";
  double zb = -gp.d_seat / 2.0 + gp.d_back / 2.0;
  double bw = kBarWidthScale * gp.w_back;
  double bh = kBarHeightScale * gp.h_back;
  double xo = (gp.w_back - bw) / 2.0;
  switch (variant) {
    case 0:
      back.children.push_back(leaf("back_surface",
                                   {0, seat_top + gp.h_back / 2.0, zb},
                                   {gp.w_back, gp.h_back, gp.d_back}));
      break;
    case 1:
      for (double x : {-xo, 0.0, xo})
        back.children.push_back(leaf("back_bar", {x, seat_top + gp.h_back / 2.0, zb},
                                     {bw, gp.h_back, gp.d_back}));
      break;
    case 2:
      for (double f : {1.0 / 6.0, 3.0 / 6.0, 5.0 / 6.0})
        back.children.push_back(leaf("back_bar", {0, seat_top + f * gp.h_back, zb},
                                     {gp.w_back, bh, gp.d_back}));
      break;
    case 3:
      back.children.push_back(leaf("back_surface",
                                   {0, seat_top + 0.75 * gp.h_back, zb},
                                   {gp.w_back, gp.h_back / 2.0, gp.d_back}));
      for (double x : {-xo, xo})
        back.children.push_back(leaf("back_bar", {x, seat_top + 0.25 * gp.h_back, zb},
                                     {bw, gp.h_back / 2.0, gp.d_back}));
      break;
    default:
      throw std::out_of_range("back variant out of range");
  }
  return back;
}

Part build_arm(const GlobalParams& gp, int variant, double seat_top, double side) {
  Part arm;
  arm.semantic = "arm";
  double arm_depth = gp.d_seat / 2.0;  // arms span the front half of the seat
  double x = side * (gp.w_seat / 2.0 + 0.04);
  double rest_y = seat_top + 0.25 * gp.h_back;
  double rest_h = 0.06;
  arm.children.push_back(
      leaf("arm_rest", {x, rest_y, arm_depth / 2.0}, {0.08, rest_h, arm_depth}));
  double sup_h = std::max(0.02, rest_y - rest_h / 2.0 - seat_top);
  double sup_y = seat_top + sup_h / 2.0;
  arm.children.push_back(leaf("arm_support",
                              {x, sup_y, arm_depth - gp.w_leg / 2.0},
                              {gp.w_leg, sup_h, gp.w_leg}));
  if (variant == 2)
    arm.children.push_back(leaf("arm_support", {x, sup_y, gp.w_leg / 2.0},
                                {gp.w_leg, sup_h, gp.w_leg}));
  return arm;
}

Part build_base(const GlobalParams& gp, int legs_variant, int stretcher_variant) {
  Part base;
  base.semantic = "base";
  double leg_h = (legs_variant == 1 ? 1.0 : kShortLegScale) * gp.h_leg;
  double lx = gp.w_seat / 2.0 - gp.w_leg / 2.0;
  double lz = gp.d_seat / 2.0 - gp.w_leg / 2.0;
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      base.children.push_back(leaf("leg", {sx * lx, leg_h / 2.0, sz * lz},
                                   {gp.w_leg, leg_h, gp.w_leg}));
  double ys = 0.3 * leg_h;
  double span_x = gp.w_seat - 2.0 * gp.w_leg;
  double span_z = gp.d_seat - 2.0 * gp.w_leg;
  switch (stretcher_variant) {
    case 0:  // squared: four bars between adjacent legs
      for (double sz : {-1.0, 1.0})
        base.children.push_back(leaf("stretcher", {0, ys, sz * lz},
                                     {span_x, kStretcherHeight, gp.w_leg}));
      for (double sx : {-1.0, 1.0})
        base.children.push_back(leaf("stretcher", {sx * lx, ys, 0},
                                     {gp.w_leg, kStretcherHeight, span_z}));
      break;
    case 1:  // H-like: two side bars plus a center cross bar
      for (double sx : {-1.0, 1.0})
        base.children.push_back(leaf("stretcher", {sx * lx, ys, 0},
                                     {gp.w_leg, kStretcherHeight, span_z}));
      base.children.push_back(
          leaf("stretcher", {0, ys, 0}, {span_x, kStretcherHeight, gp.w_leg}));
      break;
    case 2: {  // X-like: two diagonals rotated about the height axis
      double dx = 2.0 * lx, dz = 2.0 * lz;
      double len = std::sqrt(dx * dx + dz * dz);
      double angle = std::atan2(dz, dx);
      for (double sign : {-1.0, 1.0})
        base.children.push_back(leaf("stretcher", {0, ys, 0},
                                     {len, kStretcherHeight, gp.w_leg},
                                     Quat::from_axis_angle({0, 1, 0}, sign * angle)));
      break;
    }
    case 3:
      break;  // none
    default:
      throw std::out_of_range("stretcher variant out of range");
  }
  return base;
}

}  // namespace

ShapeTree build_variant(const GlobalParams& gp, const VariantIndex& v, Subtype subtype) {
  bool has_base = subtype != Subtype::Sofa;
  bool has_back = subtype != Subtype::Stool;
  bool has_arms = subtype != Subtype::Stool && v.arms > 0;

  double leg_h = has_base ? (v.legs == 1 ? 1.0 : kShortLegScale) * gp.h_leg : 0.0;
  double seat_t = kSeatThicknessScale * gp.h_seat;
  double seat_top = leg_h + seat_t;

  Part root;
  root.semantic = "shape";
  if (has_back) root.children.push_back(build_back(gp, v.back, seat_top));
  root.children.push_back(leaf("seat", {0, leg_h + seat_t / 2.0, 0},
                               {gp.w_seat, seat_t, gp.d_seat}));
  if (has_arms)
    for (double side : {-1.0, 1.0})
      root.children.push_back(build_arm(gp, v.arms, seat_top, side));
  if (has_base) root.children.push_back(build_base(gp, v.legs, v.stretcher));

  fit_container_box(root);

  // normalize: center the bounding box at the origin, then scale the whole
  // shape into the unit sphere
  Vec3 shift = root.center * -1.0;
  std::vector<Vec3> corners;
  collect_corners(root, corners);
  double max_norm = 0.0;
  for (const Vec3& c : corners) max_norm = std::max(max_norm, (c + shift).norm());
  transform_tree(root, shift, 1.0 / max_norm);

  ShapeTree shape;
  shape.category = kSyntheticCategory;
  shape.taxonomy = synthetic_taxonomy();
  shape.root = std::move(root);
  return shape;
}

std::vector<SyntheticGroup> generate_dataset(const DatasetConfig& config) {
  if (config.groups_per_subtype < 1)
    throw std::invalid_argument("groups_per_subtype must be >= 1");
  std::vector<SyntheticGroup> groups;
  int gid = 0;
  for (Subtype st : {Subtype::Chair, Subtype::Sofa, Subtype::Stool}) {
    for (int g = 0; g < config.groups_per_subtype; ++g, ++gid) {
      SyntheticGroup group;
      group.subtype = st;
      group.group_id = gid;
      group.params = sample_global_params(combine_seed(config.seed, std::uint64_t(gid)));
      group.transferable = axis_mask(st);
      group.shapes.reserve(kVariantCount);
      for (int f = 0; f < kVariantCount; ++f)
        group.shapes.push_back(build_variant(group.params, VariantIndex::from_flat(f), st));
      groups.push_back(std::move(group));
    }
  }
  return groups;
}

ShapeDelta ground_truth_transfer(const SyntheticGroup& group_a, int i, int j,
                                 const SyntheticGroup& group_b) {
  if (i < 0 || i >= kVariantCount || j < 0 || j >= kVariantCount)
    throw std::out_of_range("variant index out of range");
  (void)group_a;  // the edit's definition only depends on the variant indices
  VariantIndex vi = VariantIndex::from_flat(i);
  VariantIndex vj = VariantIndex::from_flat(j);
  auto mask = axis_mask(group_b.subtype);
  bool applicable = (vi.back != vj.back && mask[0]) || (vi.legs != vj.legs && mask[1]) ||
                    (vi.arms != vj.arms && mask[2]) ||
                    (vi.stretcher != vj.stretcher && mask[3]);
  if (!applicable) return identity_delta(group_b.shapes[i]);
  return compute_delta(group_b.shapes[i], group_b.shapes[j]);
}

std::vector<bool> test_split(int group_count, std::uint64_t seed) {
  std::vector<int> order(group_count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> h(group_count);
  for (int g = 0; g < group_count; ++g)
    h[g] = mix_seed(combine_seed(seed, fnv1a("split") ^ std::uint64_t(g)));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return h[a] != h[b] ? h[a] < h[b] : a < b;
  });
  int n_test = std::max(1, group_count / 5);
  std::vector<bool> is_test(group_count, false);
  for (int k = 0; k < n_test; ++k) is_test[order[k]] = true;
  return is_test;
}

}  // namespace synth
}  // namespace structedit
