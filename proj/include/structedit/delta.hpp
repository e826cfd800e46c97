#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "structedit/shape.hpp"

namespace structedit {

// Recursive, semantics-constrained correspondence between two shapes'
// parts. Ids are depth-first pre-order indices into each tree.
struct PartMatching {
  std::vector<std::pair<int, int>> pairs;  // (source id, target id)
  std::vector<int> unmatched_source;
  std::vector<int> unmatched_target;
  double total_cost = 0.0;  // summed box distances over matched sibling groups
};

// Roots always match; children of matched pairs are grouped per semantic
// label and assigned by minimal box distance. Throws on category mismatch.
PartMatching match_shapes(const ShapeTree& source, const ShapeTree& target);

struct PartDelta {
  Vec3 d_center;
  Quat d_orientation = Quat::identity();
  Vec3 d_extents;

  bool is_zero(double tol = 0.0) const;
};

struct Deletion {};

using PartAction = std::variant<PartDelta, Deletion>;

struct AnchorRef {
  enum class Kind { Source, Added } kind = Kind::Source;
  int id = 0;  // source part id, or index into `additions`
};

struct Addition {
  AnchorRef anchor;
  Part subtree;
};

// Minimal edit bound to a specific source shape: one action per source
// part (pre-order id), plus added subtrees attached under their anchors.
struct ShapeDelta {
  std::string source_hash;
  std::vector<PartAction> actions;  // indexed by source part id
  std::vector<Addition> additions;

  bool is_deletion(int id) const { return std::holds_alternative<Deletion>(actions[id]); }
};

ShapeDelta compute_delta(const ShapeTree& source, const ShapeTree& target);
ShapeTree apply_delta(const ShapeTree& source, const ShapeDelta& delta);
ShapeDelta identity_delta(const ShapeTree& source);

// Applies (c + dc, dq * q, r + dr, tau); throws when r + dr goes negative.
Part apply_part_delta(const Part& part, const PartDelta& d);
PartDelta part_delta_between(const Part& source, const Part& target);

// Delta file I/O per the JSON schema with format_version 1.
std::string delta_to_json(const ShapeDelta& delta);
ShapeDelta delta_from_json(const std::string& text);
ShapeDelta read_delta(const std::string& path);
void write_delta(const ShapeDelta& delta, const std::string& path);

}  // namespace structedit
