#include "structedit/shape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace structedit {

bool Taxonomy::has_label(const std::string& l) const {
  return std::find(labels.begin(), labels.end(), l) != labels.end();
}

bool Taxonomy::allows(const std::string& parent, const std::string& child) const {
  auto it = children_of.find(parent);
  if (it == children_of.end()) return false;
  const auto& v = it->second;
  return std::find(v.begin(), v.end(), child) != v.end();
}

const std::vector<std::string>& Taxonomy::allowed_children(const std::string& parent) const {
  static const std::vector<std::string> empty;
  auto it = children_of.find(parent);
  return it == children_of.end() ? empty : it->second;
}

int Taxonomy::label_index(const std::string& l) const {
  auto it = std::find(labels.begin(), labels.end(), l);
  return it == labels.end() ? -1 : int(it - labels.begin());
}

namespace {

void validate_node(const Part& p, const Taxonomy& tax, const std::string& path,
                   int depth, int max_depth) {
  if (depth > max_depth)
    throw ValidationError("tree depth exceeds " + std::to_string(max_depth) + " at " + path);
  double qn = p.orientation.norm();
  if (std::abs(qn - 1.0) > 1e-9)
    throw ValidationError("quaternion not unit at " + path);
  if (p.orientation.w < 0.0)
    throw ValidationError("quaternion not canonical (w < 0) at " + path);
  if (p.extents.x < 0.0 || p.extents.y < 0.0 || p.extents.z < 0.0)
    throw ValidationError("negative extents at " + path);
  if (!tax.has_label(p.semantic))
    throw ValidationError("unknown semantic label '" + p.semantic + "' at " + path);
  for (size_t i = 0; i < p.children.size(); ++i) {
    const Part& c = p.children[i];
    std::string cpath = path + "/" + std::to_string(i);
    if (!tax.allows(p.semantic, c.semantic))
      throw ValidationError("label '" + c.semantic + "' not allowed under '" +
                            p.semantic + "' at " + cpath);
    validate_node(c, tax, cpath, depth + 1, max_depth);
  }
}

}  // namespace

void validate_shape(const ShapeTree& shape, int max_depth) {
  if (!shape.taxonomy) throw ValidationError("shape has no taxonomy");
  validate_node(shape.root, *shape.taxonomy, "root", 0, max_depth);
}

std::vector<FlatPart> flatten(const Part& root) {
  std::vector<FlatPart> out;
  std::function<void(const Part&, int, int, int)> rec =
      [&](const Part& p, int parent, int depth, int child_index) {
        out.push_back({&p, parent, depth, child_index});
        int self = int(out.size()) - 1;
        for (size_t i = 0; i < p.children.size(); ++i)
          rec(p.children[i], self, depth + 1, int(i));
      };
  rec(root, -1, 0, -1);
  return out;
}

int count_parts(const Part& root) {
  int n = 1;
  for (const Part& c : root.children) n += count_parts(c);
  return n;
}

std::vector<int> leaf_ids(const std::vector<FlatPart>& flat) {
  std::vector<int> ids;
  for (size_t i = 0; i < flat.size(); ++i)
    if (flat[i].part->is_leaf()) ids.push_back(int(i));
  return ids;
}

}  // namespace structedit
