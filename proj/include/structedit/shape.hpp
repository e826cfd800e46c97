#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "structedit/geometry.hpp"

namespace structedit {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Oriented bounding box with semantics. `extents` are half-axis lengths:
// the box spans [-r, +r] per axis before rotation.
struct Part {
  Vec3 center;
  Quat orientation = Quat::identity();
  Vec3 extents;
  std::string semantic;
  std::vector<Part> children;

  bool is_leaf() const { return children.empty(); }
};

struct Taxonomy {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::string>> children_of;

  bool has_label(const std::string& l) const;
  bool allows(const std::string& parent, const std::string& child) const;
  // Labels allowed as children of `parent`, in declaration order.
  const std::vector<std::string>& allowed_children(const std::string& parent) const;
  int label_index(const std::string& l) const;  // -1 when unknown
};

struct ShapeTree {
  std::string category;
  std::shared_ptr<const Taxonomy> taxonomy;
  Part root;
};

inline constexpr int kDefaultMaxDepth = 12;

// Throws ValidationError naming the offending node path (e.g. "root/2/0").
void validate_shape(const ShapeTree& shape, int max_depth = kDefaultMaxDepth);

// Flattened view of a tree in depth-first pre-order. Part ids used by
// matching and deltas are indices into this order.
struct FlatPart {
  const Part* part;
  int parent;       // -1 for root
  int depth;        // 0 for root
  int child_index;  // index within parent's children, -1 for root
};

std::vector<FlatPart> flatten(const Part& root);
int count_parts(const Part& root);
std::vector<int> leaf_ids(const std::vector<FlatPart>& flat);

}  // namespace structedit
