#include "structedit/delta.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "structedit/assignment.hpp"
#include "structedit/sampling.hpp"
#include "structedit/shape_io.hpp"

namespace structedit {

using nlohmann::json;

namespace {

struct TreeIndex {
  std::vector<FlatPart> flat;
  std::vector<std::vector<int>> children;  // ids of children per part id
  std::vector<int> subtree_size;

  explicit TreeIndex(const Part& root) {
    flat = flatten(root);
    children.resize(flat.size());
    subtree_size.assign(flat.size(), 1);
    for (size_t i = 1; i < flat.size(); ++i) children[flat[i].parent].push_back(int(i));
    for (int i = int(flat.size()) - 1; i >= 1; --i)
      subtree_size[flat[i].parent] += subtree_size[i];
  }
};

class BoxPointCache {
 public:
  explicit BoxPointCache(const TreeIndex& idx) : idx_(idx), pts_(idx.flat.size()) {}

  const PointSet& get(int id) {
    if (pts_[id].empty()) pts_[id] = sample_box_points(*idx_.flat[id].part, kMatchGridM);
    return pts_[id];
  }

 private:
  const TreeIndex& idx_;
  std::vector<PointSet> pts_;
};

}  // namespace

PartMatching match_shapes(const ShapeTree& source, const ShapeTree& target) {
  if (source.category != target.category)
    throw std::invalid_argument("category mismatch: " + source.category + " vs " +
                                target.category);
  TreeIndex si(source.root), ti(target.root);
  BoxPointCache sp(si), tp(ti);

  PartMatching m;
  std::vector<char> src_matched(si.flat.size(), 0), tgt_matched(ti.flat.size(), 0);

  std::function<void(int, int)> match_pair = [&](int s, int t) {
    m.pairs.emplace_back(s, t);
    src_matched[s] = 1;
    tgt_matched[t] = 1;

    // group children per semantic label; label order is first appearance
    // in the source children, then target-only labels
    std::vector<std::string> label_order;
    auto note_label = [&](const std::string& l) {
      if (std::find(label_order.begin(), label_order.end(), l) == label_order.end())
        label_order.push_back(l);
    };
    for (int c : si.children[s]) note_label(si.flat[c].part->semantic);
    for (int c : ti.children[t]) note_label(ti.flat[c].part->semantic);

    for (const std::string& label : label_order) {
      std::vector<int> sc, tc;
      for (int c : si.children[s])
        if (si.flat[c].part->semantic == label) sc.push_back(c);
      for (int c : ti.children[t])
        if (ti.flat[c].part->semantic == label) tc.push_back(c);
      if (sc.empty() || tc.empty()) continue;
      CostMatrix cost(sc.size(), std::vector<double>(tc.size(), 0.0));
      for (size_t i = 0; i < sc.size(); ++i)
        for (size_t j = 0; j < tc.size(); ++j)
          cost[i][j] = box_distance_points(sp.get(sc[i]), tp.get(tc[j]));
      auto pairs = linear_assignment(cost);
      m.total_cost += assignment_cost(cost, pairs);
      for (auto [i, j] : pairs) match_pair(sc[i], tc[j]);
    }
  };

  match_pair(0, 0);
  for (size_t i = 0; i < si.flat.size(); ++i)
    if (!src_matched[i]) m.unmatched_source.push_back(int(i));
  for (size_t i = 0; i < ti.flat.size(); ++i)
    if (!tgt_matched[i]) m.unmatched_target.push_back(int(i));
  std::sort(m.pairs.begin(), m.pairs.end());
  return m;
}

bool PartDelta::is_zero(double tol) const {
  return std::abs(d_center.x) <= tol && std::abs(d_center.y) <= tol &&
         std::abs(d_center.z) <= tol && std::abs(d_extents.x) <= tol &&
         std::abs(d_extents.y) <= tol && std::abs(d_extents.z) <= tol &&
         std::abs(d_orientation.w - 1.0) <= tol && std::abs(d_orientation.x) <= tol &&
         std::abs(d_orientation.y) <= tol && std::abs(d_orientation.z) <= tol;
}

PartDelta part_delta_between(const Part& source, const Part& target) {
  PartDelta d;
  d.d_center = target.center - source.center;
  d.d_orientation =
      (target.orientation * source.orientation.conjugate()).normalized().canonical();
  d.d_extents = target.extents - source.extents;
  return d;
}

Part apply_part_delta(const Part& part, const PartDelta& d) {
  Part out = part;
  out.center = part.center + d.d_center;
  out.orientation = (d.d_orientation * part.orientation).normalized().canonical();
  Vec3 r = part.extents + d.d_extents;
  const double tol = 1e-12;
  for (double* c : {&r.x, &r.y, &r.z}) {
    if (*c < -tol)
      throw std::runtime_error("part delta yields negative extents");
    if (*c < 0.0) *c = 0.0;
  }
  out.extents = r;
  return out;
}

ShapeDelta compute_delta(const ShapeTree& source, const ShapeTree& target) {
  PartMatching m = match_shapes(source, target);
  TreeIndex si(source.root), ti(target.root);

  ShapeDelta delta;
  delta.source_hash = shape_hash(source);
  delta.actions.assign(si.flat.size(), Deletion{});

  std::vector<int> tgt_to_src(ti.flat.size(), -1);
  for (auto [s, t] : m.pairs) {
    delta.actions[s] = part_delta_between(*si.flat[s].part, *ti.flat[t].part);
    tgt_to_src[t] = s;
  }

  // maximal unmatched target subtrees become additions anchored at the
  // source match of their parent; pre-order keeps the order deterministic
  for (size_t t = 1; t < ti.flat.size(); ++t) {
    if (tgt_to_src[t] >= 0) continue;
    int parent = ti.flat[t].parent;
    if (tgt_to_src[parent] < 0) continue;  // inside a larger added subtree
    Addition add;
    add.anchor = {AnchorRef::Kind::Source, tgt_to_src[parent]};
    add.subtree = *ti.flat[t].part;
    delta.additions.push_back(std::move(add));
  }
  return delta;
}

ShapeDelta identity_delta(const ShapeTree& source) {
  ShapeDelta delta;
  delta.source_hash = shape_hash(source);
  delta.actions.assign(size_t(count_parts(source.root)), PartDelta{});
  return delta;
}

ShapeTree apply_delta(const ShapeTree& source, const ShapeDelta& delta) {
  TreeIndex si(source.root);
  if (delta.actions.size() != si.flat.size())
    throw std::runtime_error("delta does not cover the source shape's part ids (" +
                             std::to_string(delta.actions.size()) + " actions, " +
                             std::to_string(si.flat.size()) + " parts)");
  for (size_t i = 0; i < si.flat.size(); ++i) {
    if (delta.is_deletion(int(i)))
      for (int c : si.children[i])
        if (!delta.is_deletion(c))
          throw std::runtime_error("deleted part " + std::to_string(i) +
                                   " has a retained descendant " + std::to_string(c));
  }
  for (const Addition& a : delta.additions) {
    if (a.anchor.kind == AnchorRef::Kind::Source) {
      if (a.anchor.id < 0 || a.anchor.id >= int(si.flat.size()))
        throw std::runtime_error("addition anchored to unknown source part");
      if (delta.is_deletion(a.anchor.id))
        throw std::runtime_error("addition anchored to a deleted part");
    } else {
      if (a.anchor.id < 0 || a.anchor.id >= int(delta.additions.size()))
        throw std::runtime_error("addition anchored to unknown added part");
    }
  }

  // additions anchored to other additions hang off the anchor's subtree root
  std::vector<std::vector<int>> added_children(delta.additions.size());
  for (size_t k = 0; k < delta.additions.size(); ++k)
    if (delta.additions[k].anchor.kind == AnchorRef::Kind::Added)
      added_children[delta.additions[k].anchor.id].push_back(int(k));

  std::vector<char> visiting(delta.additions.size(), 0);
  std::function<Part(int)> build_addition = [&](int k) -> Part {
    if (visiting[k]) throw std::runtime_error("cycle among added-part anchors");
    visiting[k] = 1;
    Part p = delta.additions[k].subtree;
    for (int c : added_children[k]) p.children.push_back(build_addition(c));
    return p;
  };

  std::function<Part(int)> build = [&](int id) -> Part {
    Part p = apply_part_delta(*si.flat[id].part, std::get<PartDelta>(delta.actions[id]));
    p.children.clear();
    for (int c : si.children[id])
      if (!delta.is_deletion(c)) p.children.push_back(build(c));
    for (size_t k = 0; k < delta.additions.size(); ++k)
      if (delta.additions[k].anchor.kind == AnchorRef::Kind::Source &&
          delta.additions[k].anchor.id == id)
        p.children.push_back(build_addition(int(k)));
    return p;
  };

  if (delta.is_deletion(0)) throw std::runtime_error("root part cannot be deleted");
  ShapeTree out;
  out.category = source.category;
  out.taxonomy = source.taxonomy;
  out.root = build(0);
  validate_shape(out);
  return out;
}

std::string delta_to_json(const ShapeDelta& delta) {
  json j;
  j["format_version"] = 1;
  j["source_hash"] = delta.source_hash;
  json actions = json::array();
  for (size_t i = 0; i < delta.actions.size(); ++i) {
    json a;
    a["part"] = int(i);
    if (delta.is_deletion(int(i))) {
      a["kind"] = "delete";
    } else {
      const PartDelta& d = std::get<PartDelta>(delta.actions[i]);
      a["kind"] = "delta";
      a["dc"] = {d.d_center.x, d.d_center.y, d.d_center.z};
      a["dq"] = {d.d_orientation.w, d.d_orientation.x, d.d_orientation.y, d.d_orientation.z};
      a["dr"] = {d.d_extents.x, d.d_extents.y, d.d_extents.z};
    }
    actions.push_back(a);
  }
  j["actions"] = actions;
  json adds = json::array();
  for (const Addition& add : delta.additions) {
    json a;
    a["anchor"] = {
        {"kind", add.anchor.kind == AnchorRef::Kind::Source ? "source" : "added"},
        {"id", add.anchor.id}};
    a["subtree"] = json::parse(part_to_json(add.subtree));
    adds.push_back(a);
  }
  j["additions"] = adds;
  return j.dump(2);
}

ShapeDelta delta_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("delta parse error: ") + e.what());
  }
  ShapeDelta delta;
  delta.source_hash = j.value("source_hash", std::string());
  const json& actions = j.at("actions");
  delta.actions.assign(actions.size(), Deletion{});
  for (const json& a : actions) {
    int id = a.at("part").get<int>();
    if (id < 0 || id >= int(delta.actions.size()))
      throw ParseError("action part id out of range");
    std::string kind = a.at("kind").get<std::string>();
    if (kind == "delete") {
      delta.actions[id] = Deletion{};
    } else if (kind == "delta") {
      PartDelta d;
      const json &dc = a.at("dc"), &dq = a.at("dq"), &dr = a.at("dr");
      d.d_center = {dc[0].get<double>(), dc[1].get<double>(), dc[2].get<double>()};
      d.d_orientation = {dq[0].get<double>(), dq[1].get<double>(), dq[2].get<double>(),
                         dq[3].get<double>()};
      d.d_extents = {dr[0].get<double>(), dr[1].get<double>(), dr[2].get<double>()};
      delta.actions[id] = d;
    } else {
      throw ParseError("unknown action kind: " + kind);
    }
  }
  if (j.contains("additions")) {
    for (const json& a : j["additions"]) {
      Addition add;
      std::string kind = a.at("anchor").at("kind").get<std::string>();
      add.anchor.kind =
          kind == "source" ? AnchorRef::Kind::Source : AnchorRef::Kind::Added;
      add.anchor.id = a.at("anchor").at("id").get<int>();
      add.subtree = part_from_json(a.at("subtree").dump(), "addition");
      delta.additions.push_back(std::move(add));
    }
  }
  return delta;
}

ShapeDelta read_delta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open delta file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return delta_from_json(ss.str());
}

void write_delta(const ShapeDelta& delta, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write delta file: " + path);
  out << delta_to_json(delta) << "\n";
}

}  // namespace structedit
