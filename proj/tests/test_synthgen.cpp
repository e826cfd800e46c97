#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "structedit/delta.hpp"
#include "structedit/metrics.hpp"
#include "structedit/shape_io.hpp"
#include "structedit/synthgen.hpp"

using namespace structedit;
using namespace structedit::synth;

namespace {

std::multiset<std::string> label_multiset(const ShapeTree& s) {
  std::multiset<std::string> out;
  for (const auto& f : flatten(s.root)) out.insert(f.part->semantic);
  return out;
}

double max_corner_norm(const ShapeTree& s) {
  double best = 0.0;
  for (const auto& f : flatten(s.root)) {
    if (!f.part->is_leaf()) continue;
    const Part& p = *f.part;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        for (int sz : {-1, 1}) {
          Vec3 local{sx * p.extents.x, sy * p.extents.y, sz * p.extents.z};
          best = std::max(best, (p.center + p.orientation.rotate(local)).norm());
        }
  }
  return best;
}

}  // namespace

TEST_CASE("global parameter sampling") {
  GlobalParams a = sample_global_params(77);
  GlobalParams b = sample_global_params(77);
  CHECK(a.w_leg == b.w_leg);
  CHECK(a.h_back == b.h_back);
  GlobalParams c = sample_global_params(78);
  CHECK(a.w_seat != c.w_seat);

  for (std::uint64_t s = 0; s < 50; ++s) {
    GlobalParams p = sample_global_params(s);
    CHECK(p.w_leg >= 0.04);
    CHECK(p.w_leg <= 0.1);
    CHECK(p.h_leg >= 0.3);
    CHECK(p.h_leg <= 1.2);
    CHECK(p.w_seat >= 0.8);
    CHECK(p.w_seat <= 1.6);
    CHECK(p.d_seat >= 0.8);
    CHECK(p.d_seat <= 1.6);
    CHECK(p.h_seat >= 0.3);
    CHECK(p.h_seat <= 1.2);
    CHECK(p.h_back >= 0.3);
    CHECK(p.h_back <= 1.2);
    CHECK(p.w_back >= 0.8);
    CHECK(p.w_back <= 1.6);
    CHECK(p.d_back >= 0.04);
    CHECK(p.d_back <= 0.1);
  }
}

TEST_CASE("variant index") {
  for (int f = 0; f < kVariantCount; ++f) {
    VariantIndex v = VariantIndex::from_flat(f);
    CHECK(v.flat() == f);
    CHECK(v.back >= 0);
    CHECK(v.back < 4);
    CHECK(v.legs < 2);
    CHECK(v.arms < 3);
    CHECK(v.stretcher < 4);
  }
  VariantIndex v{2, 1, 2, 3};
  CHECK(v.flat() == 2 * 24 + 1 * 12 + 2 * 4 + 3);
}

TEST_CASE("axis masks") {
  auto chair = axis_mask(Subtype::Chair);
  for (bool b : chair) CHECK(b);
  auto sofa = axis_mask(Subtype::Sofa);
  CHECK(sofa[0]);   // back
  CHECK(!sofa[1]);  // legs
  CHECK(sofa[2]);   // arms
  CHECK(!sofa[3]);  // stretcher
  auto stool = axis_mask(Subtype::Stool);
  CHECK(!stool[0]);
  CHECK(stool[1]);
  CHECK(!stool[2]);
  CHECK(stool[3]);

  CHECK(subtype_from_name("chair") == Subtype::Chair);
  CHECK(subtype_name(Subtype::Stool) == "stool");
  CHECK_THROWS(subtype_from_name("table"));
}

TEST_CASE("dataset generation") {
  DatasetConfig cfg{2, 2024};
  auto groups = generate_dataset(cfg);
  REQUIRE(groups.size() == 6);

  // deterministic regeneration
  auto again = generate_dataset(cfg);
  for (size_t g = 0; g < groups.size(); ++g)
    for (int i : {0, 17, 95})
      CHECK(shape_to_json(groups[g].shapes[i]) == shape_to_json(again[g].shapes[i]));

  std::map<int, int> id_seen;
  for (const auto& g : groups) {
    CHECK(g.shapes.size() == kVariantCount);
    CHECK(++id_seen[g.group_id] == 1);
    CHECK(g.transferable == axis_mask(g.subtype));
    for (const ShapeTree& s : g.shapes) {
      CHECK_NOTHROW(validate_shape(s));
      CHECK(s.category == kSyntheticCategory);
      CHECK(max_corner_norm(s) <= 1.0 + 1e-9);
    }
    // normalization touches the sphere
    CHECK(max_corner_norm(g.shapes[0]) == doctest::Approx(1.0).epsilon(1e-9));
  }

  // subtype structure rules
  for (const auto& g : groups) {
    for (int f = 0; f < kVariantCount; ++f) {
      auto labels = label_multiset(g.shapes[f]);
      VariantIndex v = VariantIndex::from_flat(f);
      bool has_back = labels.count("back") > 0;
      bool has_arms = labels.count("arm") > 0;
      bool has_legs = labels.count("leg") > 0;
      bool has_stretcher = labels.count("stretcher") > 0;
      switch (g.subtype) {
        case Subtype::Chair:
          CHECK(has_back);
          CHECK(has_legs);
          CHECK(has_arms == (v.arms > 0));
          CHECK(has_stretcher == (v.stretcher < 3));
          break;
        case Subtype::Sofa:
          CHECK(has_back);
          CHECK(!has_legs);
          CHECK(!has_stretcher);
          CHECK(has_arms == (v.arms > 0));
          break;
        case Subtype::Stool:
          CHECK(!has_back);
          CHECK(!has_arms);
          CHECK(has_legs);
          CHECK(has_stretcher == (v.stretcher < 3));
          break;
      }
      CHECK(labels.count("seat") == 1);
    }
  }

  // inapplicable axes collapse: a stool ignores the back axis entirely
  for (const auto& g : groups) {
    if (g.subtype != Subtype::Stool) continue;
    VariantIndex a{0, 1, 0, 2}, b{3, 1, 0, 2};
    CHECK(shape_to_json(g.shapes[a.flat()]) == shape_to_json(g.shapes[b.flat()]));
    VariantIndex c{0, 1, 2, 2};
    CHECK(shape_to_json(g.shapes[a.flat()]) == shape_to_json(g.shapes[c.flat()]));
  }

  // same-variant shapes across groups of one subtype share the label multiset
  CHECK(groups[0].subtype == groups[1].subtype);
  for (int f : {0, 13, 40, 95})
    CHECK(label_multiset(groups[0].shapes[f]) == label_multiset(groups[1].shapes[f]));
}

TEST_CASE("stretcher and seat proportions") {
  DatasetConfig cfg{1, 5150};
  auto groups = generate_dataset(cfg);
  const auto& g = groups[0];
  REQUIRE(g.subtype == Subtype::Chair);
  // squared stretchers, long legs, no arms, solid back: flat = 0*24+1*12+0*4+0
  const ShapeTree& s = g.shapes[12];

  const Part* seat = nullptr;
  const Part* stretcher = nullptr;
  for (const auto& f : flatten(s.root)) {
    if (f.part->semantic == "seat") seat = f.part;
    if (f.part->semantic == "stretcher" && !stretcher) stretcher = f.part;
  }
  REQUIRE(seat != nullptr);
  REQUIRE(stretcher != nullptr);

  // normalization scales everything uniformly, so recover the scale from the
  // seat: its full thickness is 0.15 * h_seat before normalization
  double scale = (2 * seat->extents.y) / (0.15 * g.params.h_seat);
  CHECK(2 * stretcher->extents.y == doctest::Approx(0.03 * scale).epsilon(1e-9));
  CHECK(2 * seat->extents.x == doctest::Approx(g.params.w_seat * scale).epsilon(1e-9));
}

TEST_CASE("ground truth transfer") {
  DatasetConfig cfg{2, 314};
  auto groups = generate_dataset(cfg);
  const SyntheticGroup* chair_a = nullptr;
  const SyntheticGroup* chair_b = nullptr;
  const SyntheticGroup* stool = nullptr;
  for (const auto& g : groups) {
    if (g.subtype == Subtype::Chair) (chair_a ? chair_b : chair_a) = &g;
    if (g.subtype == Subtype::Stool && !stool) stool = &g;
  }
  REQUIRE(chair_a);
  REQUIRE(chair_b);
  REQUIRE(stool);

  // transfer within the chair family lands exactly on the target variant
  Rng rng(1);
  for (int trial = 0; trial < 8; ++trial) {
    int i = int(rng.next_below(96)), j = int(rng.next_below(96));
    ShapeDelta d = ground_truth_transfer(*chair_a, i, j, *chair_b);
    ShapeTree out = apply_delta(chair_b->shapes[i], d);
    CHECK(structural_distance(out, chair_b->shapes[j]) == 0.0);
    CHECK(match_shapes(out, chair_b->shapes[j]).total_cost <= 1e-9);
  }

  // a pure back edit transferred onto a stool is the identity
  VariantIndex vi{0, 1, 0, 0}, vj{2, 1, 0, 0};
  ShapeDelta d = ground_truth_transfer(*chair_a, vi.flat(), vj.flat(), *stool);
  ShapeTree out = apply_delta(stool->shapes[vi.flat()], d);
  CHECK(shape_to_json(out) == shape_to_json(stool->shapes[vi.flat()]));

  // a legs+back edit still moves the stool's legs
  VariantIndex vk{2, 0, 0, 0};
  ShapeDelta d2 = ground_truth_transfer(*chair_a, vi.flat(), vk.flat(), *stool);
  ShapeTree out2 = apply_delta(stool->shapes[vi.flat()], d2);
  CHECK(structural_distance(out2, stool->shapes[vk.flat()]) == 0.0);
  CHECK(match_shapes(out2, stool->shapes[vk.flat()]).total_cost <= 1e-9);
}

TEST_CASE("train test split") {
  auto flags = test_split(30, 9);
  CHECK(flags.size() == 30);
  CHECK(std::count(flags.begin(), flags.end(), true) == 6);
  CHECK(flags == test_split(30, 9));
  CHECK(flags != test_split(30, 10));

  auto tiny = test_split(3, 1);
  CHECK(std::count(tiny.begin(), tiny.end(), true) == 1);
}
