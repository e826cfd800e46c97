#include "structedit/shape_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace structedit {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
json quat_to_json(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

Vec3 vec_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError("expected 3-vector at " + path);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Quat quat_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError("expected quaternion [w,x,y,z] at " + path);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json node_to_json(const Part& p) {
  json j;
  j["semantic"] = p.semantic;
  j["box"] = {{"c", vec_to_json(p.center)},
              {"q", quat_to_json(p.orientation)},
              {"r", vec_to_json(p.extents)}};
  json kids = json::array();
  for (const Part& c : p.children) kids.push_back(node_to_json(c));
  j["children"] = kids;
  return j;
}

Part node_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError("expected node object at " + path);
  Part p;
  if (!j.contains("semantic") || !j["semantic"].is_string())
    throw ParseError("missing semantic at " + path);
  p.semantic = j["semantic"].get<std::string>();
  if (!j.contains("box")) throw ParseError("missing box at " + path);
  const json& b = j["box"];
  p.center = vec_from_json(b.at("c"), path + "/box/c");
  p.orientation = quat_from_json(b.at("q"), path + "/box/q");
  p.extents = vec_from_json(b.at("r"), path + "/box/r");
  if (j.contains("children")) {
    const json& kids = j["children"];
    if (!kids.is_array()) throw ParseError("children must be an array at " + path);
    for (size_t i = 0; i < kids.size(); ++i)
      p.children.push_back(node_from_json(kids[i], path + "/" + std::to_string(i)));
  }
  return p;
}

}  // namespace

std::string part_to_json(const Part& part) { return node_to_json(part).dump(); }

Part part_from_json(const std::string& text, const std::string& node_path) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("node parse error: ") + e.what());
  }
  return node_from_json(j, node_path);
}

std::string shape_to_json(const ShapeTree& shape) {
  json j;
  j["format_version"] = 1;
  j["category"] = shape.category;
  j["root"] = node_to_json(shape.root);
  return j.dump(2);
}

ShapeTree shape_from_json(const std::string& text, std::shared_ptr<const Taxonomy> taxonomy) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("shape parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("root"))
    throw ParseError("shape file missing root node");
  ShapeTree shape;
  shape.category = j.value("category", std::string());
  shape.taxonomy = std::move(taxonomy);
  shape.root = node_from_json(j["root"], "root");
  validate_shape(shape);
  return shape;
}

ShapeTree read_shape(const std::string& path, std::shared_ptr<const Taxonomy> taxonomy) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open shape file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return shape_from_json(ss.str(), std::move(taxonomy));
}

void write_shape(const ShapeTree& shape, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write shape file: " + path);
  out << shape_to_json(shape) << "\n";
}

std::string shape_hash(const ShapeTree& shape) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                (unsigned long long)fnv1a(shape_to_json(shape)));
  return buf;
}

std::shared_ptr<const Taxonomy> read_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open taxonomy file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("taxonomy parse error: ") + e.what());
  }
  auto tax = std::make_shared<Taxonomy>();
  for (const auto& l : j.at("labels")) tax->labels.push_back(l.get<std::string>());
  for (auto it = j.at("children_of").begin(); it != j.at("children_of").end(); ++it) {
    std::vector<std::string> kids;
    for (const auto& c : it.value()) kids.push_back(c.get<std::string>());
    tax->children_of[it.key()] = std::move(kids);
  }
  return tax;
}

void write_taxonomy(const Taxonomy& taxonomy, const std::string& path) {
  json j;
  j["labels"] = taxonomy.labels;
  json co = json::object();
  for (const auto& [k, v] : taxonomy.children_of) co[k] = v;
  j["children_of"] = co;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write taxonomy file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace structedit
