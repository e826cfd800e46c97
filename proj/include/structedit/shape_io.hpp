#pragma once

#include <memory>
#include <string>

#include "structedit/shape.hpp"

namespace structedit {

// Shape file: {"format_version":1, "category": str, "root": node} with node
// {"semantic": str, "box": {"c":[...], "q":[w,x,y,z], "r":[...]}, "children":[...]}.
// Reading validates against the given taxonomy.
ShapeTree read_shape(const std::string& path, std::shared_ptr<const Taxonomy> taxonomy);
void write_shape(const ShapeTree& shape, const std::string& path);

std::string shape_to_json(const ShapeTree& shape);
ShapeTree shape_from_json(const std::string& text, std::shared_ptr<const Taxonomy> taxonomy);

// Stable content hash of the serialized shape, used to bind deltas to
// their source shape.
std::string shape_hash(const ShapeTree& shape);

// Single node (sub)tree serialization, shared with the delta file format.
std::string part_to_json(const Part& part);
Part part_from_json(const std::string& text, const std::string& node_path = "node");

// Taxonomy file: {"labels":[...], "children_of": {label: [labels]}}.
std::shared_ptr<const Taxonomy> read_taxonomy(const std::string& path);
void write_taxonomy(const Taxonomy& taxonomy, const std::string& path);

}  // namespace structedit
