#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "structedit/assignment.hpp"
#include "structedit/delta.hpp"
#include "structedit/metrics.hpp"
#include "structedit/sampling.hpp"
#include "structedit/shape_io.hpp"
#include "structedit/synthgen.hpp"

using namespace structedit;

namespace {

double brute_force_min_cost(const CostMatrix& cost) {
  int n = int(cost.size()), m = int(cost[0].size());
  double best = 1e300;
  if (n <= m) {
    std::vector<int> cols(m);
    std::iota(cols.begin(), cols.end(), 0);
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i) c += cost[i][cols[i]];
      best = std::min(best, c);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    do {
      double c = 0.0;
      for (int j = 0; j < m; ++j) c += cost[rows[j]][j];
      best = std::min(best, c);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

}  // namespace

TEST_CASE("linear assignment basics") {
  CostMatrix diag = {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  auto pairs = linear_assignment(diag);
  REQUIRE(pairs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(pairs[i].first == i);
    CHECK(pairs[i].second == i);
  }
  CHECK(assignment_cost(diag, pairs) == 0.0);

  // all-equal costs: deterministic tie-break picks the identity pairing
  CostMatrix flat(3, std::vector<double>(4, 2.5));
  pairs = linear_assignment(flat);
  REQUIRE(pairs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(pairs[i].first == i);
    CHECK(pairs[i].second == i);
  }
  CHECK(assignment_cost(flat, pairs) == doctest::Approx(3 * 2.5));

  CHECK(linear_assignment({}).empty());
  CHECK_THROWS(linear_assignment({{-1.0}}));
}

TEST_CASE("linear assignment matches brute force") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 6, m = 6;
    if (trial % 3 == 1) m = 4;
    if (trial % 3 == 2) n = 4;
    CostMatrix cost(n, std::vector<double>(m));
    for (auto& row : cost)
      for (double& c : row) c = rng.uniform(0, 10);
    auto pairs = linear_assignment(cost);
    CHECK(int(pairs.size()) == std::min(n, m));
    CHECK(assignment_cost(cost, pairs) ==
          doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("match shapes") {
  auto groups = synth::generate_dataset({1, 5});
  const ShapeTree& s = groups[0].shapes[13];

  PartMatching self = match_shapes(s, s);
  CHECK(self.unmatched_source.empty());
  CHECK(self.unmatched_target.empty());
  CHECK(self.total_cost == doctest::Approx(0.0));
  CHECK(int(self.pairs.size()) == count_parts(s.root));

  // removing one leaf leaves exactly that leaf unmatched
  ShapeTree pruned = s;
  auto flat = flatten(s.root);
  // drop the last child of the base (a leg or stretcher leaf)
  Part* base = nullptr;
  for (Part& c : pruned.root.children)
    if (c.semantic == "base") base = &c;
  REQUIRE(base != nullptr);
  std::string removed_label = base->children.back().semantic;
  base->children.pop_back();
  PartMatching m = match_shapes(s, pruned);
  CHECK(m.unmatched_source.size() == 1);
  CHECK(m.unmatched_target.empty());
  CHECK(flat[m.unmatched_source[0]].part->semantic == removed_label);

  // category mismatch
  ShapeTree other = s;
  other.category = "elsewhere";
  CHECK_THROWS(match_shapes(s, other));
}

TEST_CASE("matching cost is optimal on permuted same-label siblings") {
  // chairs have 4 same-label legs; permuting them must still yield the
  // brute-force min-cost assignment within the leg group
  auto groups = synth::generate_dataset({1, 17});
  ShapeTree a = groups[0].shapes[12];  // legs long, no arms, squared stretchers
  ShapeTree b = a;
  Part* base = nullptr;
  for (Part& c : b.root.children)
    if (c.semantic == "base") base = &c;
  REQUIRE(base != nullptr);
  std::vector<Part> legs;
  for (Part& c : base->children)
    if (c.semantic == "leg") legs.push_back(c);
  REQUIRE(legs.size() == 4);
  std::rotate(legs.begin(), legs.begin() + 1, legs.end());
  int li = 0;
  for (Part& c : base->children)
    if (c.semantic == "leg") c = legs[li++];

  PartMatching m = match_shapes(a, b);
  CHECK(m.unmatched_source.empty());
  CHECK(m.unmatched_target.empty());

  CostMatrix cost(4, std::vector<double>(4));
  std::vector<const Part*> la, lb;
  for (const Part& c : a.root.children)
    if (c.semantic == "base")
      for (const Part& l : c.children)
        if (l.semantic == "leg") la.push_back(&l);
  for (const Part& c : b.root.children)
    if (c.semantic == "base")
      for (const Part& l : c.children)
        if (l.semantic == "leg") lb.push_back(&l);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) cost[i][j] = box_distance(*la[i], *lb[j]);
  double oracle = brute_force_min_cost(cost);
  // the leg-group cost inside the recursive match equals the oracle: legs
  // are identical boxes up to permutation, so the optimum is zero
  CHECK(oracle == doctest::Approx(0.0));
  CHECK(m.total_cost == doctest::Approx(0.0));
}

TEST_CASE("compute and apply delta round trip") {
  auto groups = synth::generate_dataset({2, 23});
  const auto& g = groups[0];

  // identity
  ShapeDelta id = identity_delta(g.shapes[0]);
  ShapeTree same = apply_delta(g.shapes[0], id);
  CHECK(shape_to_json(same) == shape_to_json(g.shapes[0]));
  CHECK(structural_distance(g.shapes[0], same) == 0.0);

  ShapeDelta self_delta = compute_delta(g.shapes[5], g.shapes[5]);
  CHECK(self_delta.additions.empty());
  for (size_t i = 0; i < self_delta.actions.size(); ++i) {
    REQUIRE(!self_delta.is_deletion(int(i)));
    CHECK(std::get<PartDelta>(self_delta.actions[i]).is_zero(1e-12));
  }

  // lifted seat: exactly one nonzero part delta
  ShapeTree lifted = g.shapes[5];
  for (Part& c : lifted.root.children)
    if (c.semantic == "seat") c.center.y += 0.1;
  // keep container boxes consistent with a pure leaf move is not needed for
  // the delta itself; compare leaf actions only
  ShapeDelta d = compute_delta(g.shapes[5], lifted);
  CHECK(d.additions.empty());
  int nonzero = 0;
  for (size_t i = 0; i < d.actions.size(); ++i) {
    REQUIRE(!d.is_deletion(int(i)));
    const auto& pd = std::get<PartDelta>(d.actions[i]);
    if (!pd.is_zero(1e-12)) {
      ++nonzero;
      CHECK(pd.d_center.y == doctest::Approx(0.1));
      CHECK(pd.d_center.x == doctest::Approx(0.0));
    }
  }
  CHECK(nonzero == 1);

  // structural round trips across variants
  Rng rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    int i = int(rng.next_below(96)), j = int(rng.next_below(96));
    ShapeDelta dd = compute_delta(g.shapes[i], g.shapes[j]);
    ShapeTree rebuilt = apply_delta(g.shapes[i], dd);
    CHECK(structural_distance(rebuilt, g.shapes[j]) == 0.0);
    PartMatching m = match_shapes(rebuilt, g.shapes[j]);
    CHECK(m.total_cost <= 1e-9);
  }
}

TEST_CASE("deletion and inverse addition") {
  auto groups = synth::generate_dataset({1, 31});
  // variant with arms (flat 4 = arms variant 1) vs without (flat 0)
  const ShapeTree& with_arms = groups[0].shapes[4 + 12];  // legs long
  const ShapeTree& without = groups[0].shapes[0 + 12];

  ShapeDelta del = compute_delta(with_arms, without);
  int deletions = 0;
  for (size_t i = 0; i < del.actions.size(); ++i)
    if (del.is_deletion(int(i))) ++deletions;
  CHECK(deletions == 6);  // two arm containers, each rest + support
  CHECK(del.additions.empty());

  ShapeTree stripped = apply_delta(with_arms, del);
  CHECK(structural_distance(stripped, without) == 0.0);

  // inverse direction adds the arms back
  ShapeDelta inv = compute_delta(stripped, with_arms);
  CHECK(inv.additions.size() == 2);
  for (const auto& a : inv.additions) CHECK(a.subtree.semantic == "arm");
  ShapeTree restored = apply_delta(stripped, inv);
  CHECK(structural_distance(restored, with_arms) == 0.0);
}

TEST_CASE("delta file round trip") {
  auto groups = synth::generate_dataset({1, 41});
  const auto& g = groups[0];
  ShapeDelta d = compute_delta(g.shapes[3], g.shapes[77]);
  ShapeDelta back = delta_from_json(delta_to_json(d));
  CHECK(delta_to_json(back) == delta_to_json(d));
  ShapeTree a = apply_delta(g.shapes[3], back);
  CHECK(structural_distance(a, g.shapes[77]) == 0.0);
}

TEST_CASE("apply delta rejects malformed deltas") {
  auto groups = synth::generate_dataset({1, 43});
  const ShapeTree& s = groups[0].shapes[0];
  ShapeDelta id = identity_delta(s);

  ShapeDelta wrong = id;
  wrong.actions.pop_back();
  CHECK_THROWS(apply_delta(s, wrong));

  ShapeDelta neg = id;
  auto& pd = std::get<PartDelta>(neg.actions[1]);
  pd.d_extents = {-10, 0, 0};
  CHECK_THROWS(apply_delta(s, neg));

  // deleting a parent while keeping a child is invalid
  auto flat = flatten(s.root);
  int parent_with_child = -1;
  for (size_t i = 1; i < flat.size(); ++i)
    if (!flat[i].part->is_leaf()) parent_with_child = int(i);
  REQUIRE(parent_with_child >= 0);
  ShapeDelta bad = id;
  bad.actions[parent_with_child] = Deletion{};
  CHECK_THROWS(apply_delta(s, bad));
}
