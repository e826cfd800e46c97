#include "structedit/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <json.hpp>

#include "structedit/assignment.hpp"
#include "structedit/sampling.hpp"
#include "structedit/shape_io.hpp"
#include "structedit/tape.hpp"

namespace structedit {

using ad::Tape;
using ad::Var;
using nlohmann::json;

namespace {

// decoded boxes never collapse below this half-extent
constexpr double kMinExtent = 1e-6;

struct TreeView {
  std::vector<FlatPart> flat;
  std::vector<std::vector<int>> kids;

  explicit TreeView(const Part& root) {
    flat = flatten(root);
    kids.resize(flat.size());
    for (size_t i = 1; i < flat.size(); ++i) kids[flat[i].parent].push_back(int(i));
  }
};

std::vector<double> box_params(const Part& p) {
  return {p.center.x, p.center.y, p.center.z, p.orientation.w, p.orientation.x,
          p.orientation.y, p.orientation.z, p.extents.x, p.extents.y, p.extents.z};
}

std::vector<double> delta_params(const PartDelta& d) {
  return {d.d_center.x,      d.d_center.y,      d.d_center.z,
          d.d_orientation.w, d.d_orientation.x, d.d_orientation.y,
          d.d_orientation.z, d.d_extents.x,     d.d_extents.y,
          d.d_extents.z};
}

std::vector<double> flat_points(const PointSet& ps) {
  std::vector<double> out;
  out.reserve(ps.size() * 3);
  for (const Vec3& p : ps) {
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.z);
  }
  return out;
}

std::vector<double> onehot(int idx, int n) {
  std::vector<double> v(n, 0.0);
  v[idx] = 1.0;
  return v;
}

Quat quat_from_raw(const double* q) {
  Quat out{q[0], q[1], q[2], q[3]};
  if (out.norm() < 1e-9) return Quat::identity();
  return out.normalized().canonical();
}

// Nested (added-anchored) additions materialized into their anchors'
// subtrees; returns one full subtree per source-anchored addition.
std::vector<std::pair<int, Part>> materialize_additions(const ShapeDelta& delta) {
  std::vector<std::vector<int>> nested(delta.additions.size());
  for (size_t k = 0; k < delta.additions.size(); ++k)
    if (delta.additions[k].anchor.kind == AnchorRef::Kind::Added)
      nested[delta.additions[k].anchor.id].push_back(int(k));
  std::function<Part(int)> build = [&](int k) {
    Part p = delta.additions[k].subtree;
    for (int c : nested[k]) p.children.push_back(build(c));
    return p;
  };
  std::vector<std::pair<int, Part>> out;
  for (size_t k = 0; k < delta.additions.size(); ++k)
    if (delta.additions[k].anchor.kind == AnchorRef::Kind::Source)
      out.push_back({delta.additions[k].anchor.id, build(int(k))});
  return out;
}

// One forward-pass graph over a tape: all sub-networks of the model, plus
// the recursive encode/decode drivers.
struct Net {
  Tape& tape;
  nn::ParameterStore& params;
  const VaeConfig& cfg;
  const Taxonomy& tax;
  nn::MlpOptions opt;
  int T;  // taxonomy label count
  int F;
  int L;

  Net(Tape& t, nn::ParameterStore& p, const VaeConfig& c, const Taxonomy& tx)
      : tape(t), params(p), cfg(c), tax(tx) {
    opt.group_norm = cfg.group_norm;
    opt.skip = cfg.skip_connections;
    T = int(tax.labels.size());
    F = cfg.feature_width;
    L = cfg.latent_width;
  }

  Var mlp(const std::string& name, Var x, int out) {
    return nn::mlp_block(tape, params, name, x, F, out, opt);
  }
  Var pool(const std::string& name, const std::vector<Var>& elems, int elem_size,
           int out) {
    return nn::set_pool(tape, params, name, elems, elem_size, F, out, opt);
  }
  Var tau(const std::string& label) {
    return tape.constant(onehot(tax.label_index(label), T));
  }
  Var zeros(int n) { return tape.constant(std::vector<double>(n, 0.0)); }

  // ---- source encoder ----

  struct SourceEnc {
    std::vector<Var> v_box, v_tree;
  };

  SourceEnc encode_source(const TreeView& tv) {
    int n = int(tv.flat.size());
    SourceEnc e;
    e.v_box.resize(n);
    e.v_tree.resize(n);
    for (int i = n - 1; i >= 0; --i) {
      const Part& part = *tv.flat[i].part;
      e.v_box[i] = mlp("f_box", tape.constant(box_params(part)), F);
      if (tv.kids[i].empty()) {
        e.v_tree[i] = e.v_box[i];
      } else {
        std::vector<Var> elems;
        for (int c : tv.kids[i])
          elems.push_back(tape.concat({e.v_tree[c], tau(tv.flat[c].part->semantic)}));
        e.v_tree[i] = pool("f_tree", elems, F + T, F);
      }
    }
    return e;
  }

  // added subtrees use the source-style recursive encoder
  Var added_feature(const Part& p) {
    Var vb = mlp("f_box", tape.constant(box_params(p)), F);
    if (p.children.empty()) return vb;
    std::vector<Var> elems;
    for (const Part& c : p.children)
      elems.push_back(tape.concat({added_feature(c), tau(c.semantic)}));
    return pool("f_tree", elems, F + T, F);
  }

  // ---- delta encoder ----

  struct Posterior {
    Var mean, logvar;
  };

  Posterior encode_delta(const TreeView& tv, const SourceEnc& enc,
                         const ShapeDelta& delta) {
    if (delta.actions.size() != tv.flat.size())
      throw std::invalid_argument("delta is not bound to this source shape");
    auto added = materialize_additions(delta);

    std::function<Var(int)> component = [&](int sid) -> Var {
      std::vector<Var> child_feats;
      for (int c : tv.kids[sid]) child_feats.push_back(component(c));
      for (const auto& [anchor, subtree] : added)
        if (anchor == sid) child_feats.push_back(added_feature(subtree));
      Var y_tree = child_feats.empty() ? zeros(F)
                                       : pool("c_tree", child_feats, F, F);
      bool del = delta.is_deletion(sid);
      Var y_dbox =
          del ? zeros(F)
              : mlp("c_dbox",
                    tape.constant(delta_params(std::get<PartDelta>(delta.actions[sid]))),
                    F);
      Var rho = tape.constant(del ? std::vector<double>{0, 1}
                                  : std::vector<double>{1, 0});
      return mlp("c_part",
                 tape.concat({y_dbox, y_tree, rho, enc.v_box[sid],
                              tau(tv.flat[sid].part->semantic)}),
                 F);
    };

    Var y_root = component(0);
    Posterior post;
    post.mean = tape.affine(y_root, params.weight(tape, "latent_mean.w", L, F),
                            params.bias(tape, "latent_mean.b", L));
    post.logvar = tape.affine(y_root, params.weight(tape, "latent_logvar.w", L, F),
                              params.bias(tape, "latent_logvar.b", L));
    return post;
  }

  // ---- decoder pieces ----

  Var part_feature(Var z, Var x_parent, const SourceEnc& enc, const TreeView& tv,
                   int sid) {
    return mlp("d_tree",
               tape.concat({z, x_parent, enc.v_box[sid], enc.v_tree[sid],
                            tau(tv.flat[sid].part->semantic)}),
               F);
  }

  struct Slot {
    Var feat;
    Var exist_logit;
  };

  std::vector<Slot> add_slots(Var x_parent, bool under_added) {
    const std::string inst = under_added ? "d_add_new" : "d_add_src";
    Var outv = mlp(inst, x_parent, cfg.add_slots * (F + 1));
    std::vector<Slot> slots;
    for (int s = 0; s < cfg.add_slots; ++s)
      slots.push_back({tape.slice(outv, s * F, F),
                       tape.slice(outv, cfg.add_slots * F + s, 1)});
    return slots;
  }

  struct BoxHead {
    Var raw;           // 10 box parameters
    Var label_logits;  // T
  };

  BoxHead box_head(Var feat) {
    Var out = mlp("d_box", feat, 10 + T);
    return {tape.slice(out, 0, 10), tape.slice(out, 10, T)};
  }

  Var leaf_head(Var feat) { return mlp("d_leaf", feat, 1); }

  // predicted box-delta terms, shared by training loss and inference
  struct PredBox {
    Var center, quat, extents;
  };

  // applies the predicted raw output to the source part on-tape
  PredBox apply_raw(Var raw, const Part& src) {
    if (cfg.box_deltas) {
      Var dq = tape.normalize(tape.slice(raw, 3, 4));
      Var q = tape.quat_multiply(
          dq, tape.constant({src.orientation.w, src.orientation.x, src.orientation.y,
                             src.orientation.z}));
      Var c = tape.add(tape.slice(raw, 0, 3),
                       tape.constant({src.center.x, src.center.y, src.center.z}));
      Var r = tape.add(tape.slice(raw, 7, 3),
                       tape.constant({src.extents.x, src.extents.y, src.extents.z}));
      return {c, q, r};
    }
    return {tape.slice(raw, 0, 3), tape.normalize(tape.slice(raw, 3, 4)),
            tape.slice(raw, 7, 3)};
  }

  PartDelta raw_to_part_delta(const std::vector<double>& raw, const Part& src) {
    PartDelta pd;
    if (cfg.box_deltas) {
      pd.d_center = {raw[0], raw[1], raw[2]};
      pd.d_orientation = quat_from_raw(raw.data() + 3);
      // keep the resulting extents positive; a fully collapsed box has no
      // surface to sample
      pd.d_extents = {std::max(raw[7], kMinExtent - src.extents.x),
                      std::max(raw[8], kMinExtent - src.extents.y),
                      std::max(raw[9], kMinExtent - src.extents.z)};
    } else {
      Part abs = src;
      abs.center = {raw[0], raw[1], raw[2]};
      abs.orientation = quat_from_raw(raw.data() + 3);
      abs.extents = {std::max(std::abs(raw[7]), kMinExtent),
                     std::max(std::abs(raw[8]), kMinExtent),
                     std::max(std::abs(raw[9]), kMinExtent)};
      pd = part_delta_between(src, abs);
    }
    return pd;
  }
};

std::vector<double> softmax_values(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

double sigmoid_value(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Var sum_list(Tape& tape, const std::vector<Var>& xs) {
  if (xs.empty()) return tape.constant({0.0});
  Var s = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) s = tape.add(s, xs[i]);
  return s;
}

}  // namespace

std::string vae_config_to_json(const VaeConfig& c) {
  json j;
  j["feature_width"] = c.feature_width;
  j["latent_width"] = c.latent_width;
  j["add_slots"] = c.add_slots;
  j["max_depth"] = c.max_depth;
  j["skip_connections"] = c.skip_connections;
  j["group_norm"] = c.group_norm;
  j["leaf_classifier"] = c.leaf_classifier;
  j["box_deltas"] = c.box_deltas;
  j["lambda"] = c.lambda;
  j["beta"] = c.beta;
  j["mu"] = c.mu;
  j["gamma"] = c.gamma;
  j["seed"] = c.seed;
  return j.dump();
}

VaeConfig vae_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad model config: ") + e.what());
  }
  VaeConfig c;
  c.feature_width = j.value("feature_width", c.feature_width);
  c.latent_width = j.value("latent_width", c.latent_width);
  c.add_slots = j.value("add_slots", c.add_slots);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.skip_connections = j.value("skip_connections", c.skip_connections);
  c.group_norm = j.value("group_norm", c.group_norm);
  c.leaf_classifier = j.value("leaf_classifier", c.leaf_classifier);
  c.box_deltas = j.value("box_deltas", c.box_deltas);
  c.lambda = j.value("lambda", c.lambda);
  c.beta = j.value("beta", c.beta);
  c.mu = j.value("mu", c.mu);
  c.gamma = j.value("gamma", c.gamma);
  c.seed = j.value("seed", c.seed);
  return c;
}

DeltaVae::DeltaVae(const VaeConfig& config)
    : config_(config), params_(config.seed) {}

LatentPosterior DeltaVae::encode(const ShapeTree& source,
                                 const ShapeDelta& delta) const {
  Tape tape;
  Net net(tape, params_, config_, *source.taxonomy);
  TreeView tv(source.root);
  auto enc = net.encode_source(tv);
  auto post = net.encode_delta(tv, enc, delta);
  return {tape.value(post.mean), tape.value(post.logvar)};
}

std::vector<double> DeltaVae::sample_latent(const LatentPosterior& posterior,
                                            std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> z(posterior.mean.size());
  for (size_t i = 0; i < z.size(); ++i)
    z[i] = posterior.mean[i] +
           std::exp(0.5 * posterior.log_variance[i]) * rng.normal();
  return z;
}

std::vector<double> DeltaVae::prior_latent(std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> z(config_.latent_width);
  for (double& x : z) x = rng.normal();
  return z;
}

DecodedDelta DeltaVae::decode(const ShapeTree& source,
                              const std::vector<double>& z) const {
  if (int(z.size()) != config_.latent_width)
    throw std::invalid_argument("latent width mismatch");
  Tape tape;
  Net net(tape, params_, config_, *source.taxonomy);
  TreeView tv(source.root);
  auto enc = net.encode_source(tv);
  Var zc = tape.constant(z);

  DecodedDelta out;
  out.delta.source_hash = shape_hash(source);
  out.delta.actions.assign(tv.flat.size(), PartDelta{});
  out.type_probs.resize(tv.flat.size());

  std::function<void(int)> mark_deleted = [&](int sid) {
    out.delta.actions[sid] = Deletion{};
    for (int c : tv.kids[sid]) mark_deleted(c);
  };

  // expands the proposal slots under one parent feature; kept children are
  // either pushed as additions (source anchors) or nested into `into`
  std::function<void(Var, bool, const std::string&, int, Part*, int)> expand =
      [&](Var x_parent, bool under_added, const std::string& parent_label,
          int child_depth, Part* into, int anchor_sid) {
        if (child_depth > config_.max_depth) {
          ++out.depth_truncations;
          return;
        }
        auto slots = net.add_slots(x_parent, under_added);
        for (const auto& slot : slots) {
          double p = sigmoid_value(tape.value(slot.exist_logit)[0]);
          out.existence_probs.push_back(p);
          if (p < 0.5) continue;
          auto head = net.box_head(slot.feat);
          auto label_probs = softmax_values(tape.value(head.label_logits));
          int label = int(std::max_element(label_probs.begin(), label_probs.end()) -
                          label_probs.begin());
          if (!net.tax.allows(parent_label, net.tax.labels[label])) {
            ++out.pruned_labels;
            continue;
          }
          const auto& braw = tape.value(head.raw);
          Part np;
          np.semantic = net.tax.labels[label];
          np.center = {braw[0], braw[1], braw[2]};
          np.orientation = quat_from_raw(braw.data() + 3);
          np.extents = {std::max(std::abs(braw[7]), kMinExtent),
                        std::max(std::abs(braw[8]), kMinExtent),
                        std::max(std::abs(braw[9]), kMinExtent)};
          double lp = sigmoid_value(tape.value(net.leaf_head(slot.feat))[0]);
          out.leaf_probs.push_back(lp);
          out.label_probs.push_back(label_probs);
          bool stop = config_.leaf_classifier && lp >= 0.5;
          if (!stop)
            expand(slot.feat, true, np.semantic, child_depth + 1, &np, -1);
          if (into)
            into->children.push_back(std::move(np));
          else
            out.delta.additions.push_back(
                {{AnchorRef::Kind::Source, anchor_sid}, std::move(np)});
        }
      };

  std::function<void(int, Var)> visit = [&](int sid, Var x_parent) {
    Var x_k = net.part_feature(zc, x_parent, enc, tv, sid);
    auto tprobs = softmax_values(tape.value(net.mlp("d_type", x_k, 2)));
    out.type_probs[sid] = {tprobs[0], tprobs[1]};
    if (sid != 0 && tprobs[1] > tprobs[0]) {
      mark_deleted(sid);
      return;
    }
    Var raw = net.mlp("d_dbox", x_k, 10);
    out.delta.actions[sid] =
        net.raw_to_part_delta(tape.value(raw), *tv.flat[sid].part);
    if (!tv.flat[sid].part->is_leaf())
      expand(x_k, false, tv.flat[sid].part->semantic, tv.flat[sid].depth + 1,
             nullptr, sid);
    for (int c : tv.kids[sid]) visit(c, x_k);
  };

  visit(0, net.zeros(config_.feature_width));
  return out;
}

LossBreakdown DeltaVae::loss_impl(const ShapeTree& source, const ShapeDelta& delta,
                                  const std::vector<double>& noise,
                                  bool backward) const {
  Tape tape;
  Net net(tape, params_, config_, *source.taxonomy);
  TreeView tv(source.root);
  if (delta.actions.size() != tv.flat.size())
    throw std::invalid_argument("delta is not bound to this source shape");
  if (!noise.empty() && int(noise.size()) != config_.latent_width)
    throw std::invalid_argument("noise width mismatch");

  auto enc = net.encode_source(tv);
  auto post = net.encode_delta(tv, enc, delta);
  Var z = post.mean;
  if (!noise.empty()) {
    Var std_dev = tape.exp(tape.scale(post.logvar, 0.5));
    z = tape.add(post.mean, tape.mul(std_dev, tape.constant(noise)));
  }

  auto added = materialize_additions(delta);

  std::vector<Var> l_dp, l_rho, l_add;

  // teacher-forced supervision of the addition slots under one parent
  std::function<void(Var, bool, const std::vector<const Part*>&, int)> supervise =
      [&](Var x_parent, bool under_added, const std::vector<const Part*>& gt,
          int child_depth) {
        if (child_depth > config_.max_depth) return;
        auto slots = net.add_slots(x_parent, under_added);
        std::vector<Net::BoxHead> heads;
        for (const auto& slot : slots) heads.push_back(net.box_head(slot.feat));

        std::vector<std::pair<int, int>> pairs;
        if (!gt.empty()) {
          CostMatrix cost(gt.size(),
                          std::vector<double>(slots.size(), 0.0));
          for (size_t i = 0; i < gt.size(); ++i) {
            PointSet gt_pts = sample_box_points(*gt[i], kMatchGridM);
            for (size_t s = 0; s < slots.size(); ++s) {
              const auto& braw = tape.value(heads[s].raw);
              Part pred;
              pred.center = {braw[0], braw[1], braw[2]};
              pred.orientation = quat_from_raw(braw.data() + 3);
              pred.extents = {std::abs(braw[7]), std::abs(braw[8]),
                              std::abs(braw[9])};
              cost[i][s] =
                  box_distance_points(gt_pts, sample_box_points(pred, kMatchGridM));
            }
          }
          pairs = linear_assignment(cost);
        }

        std::vector<double> slot_target(slots.size(), 0.0);
        for (auto [i, s] : pairs) slot_target[s] = 1.0;
        for (size_t s = 0; s < slots.size(); ++s)
          l_add.push_back(
              tape.bce_with_logits(slots[s].exist_logit, {slot_target[s]}));

        for (auto [i, s] : pairs) {
          const Part& child = *gt[i];
          Var pred_pts =
              tape.box_points(tape.slice(heads[s].raw, 0, 3),
                              tape.normalize(tape.slice(heads[s].raw, 3, 4)),
                              tape.slice(heads[s].raw, 7, 3), kMatchGridM);
          Var gt_pts = tape.constant(
              flat_points(sample_box_points(child, kMatchGridM)));
          l_add.push_back(
              tape.scale(tape.chamfer(pred_pts, gt_pts), config_.mu));
          l_add.push_back(tape.softmax_cross_entropy(
              heads[s].label_logits, net.tax.label_index(child.semantic)));
          if (config_.leaf_classifier)
            l_add.push_back(tape.scale(
                tape.bce_with_logits(net.leaf_head(slots[s].feat),
                                     {child.is_leaf() ? 1.0 : 0.0}),
                config_.gamma));
          std::vector<const Part*> grandchildren;
          for (const Part& g : child.children) grandchildren.push_back(&g);
          if (!grandchildren.empty() || !config_.leaf_classifier)
            supervise(slots[s].feat, true, grandchildren, child_depth + 1);
        }
      };

  std::function<void(int, Var)> visit = [&](int sid, Var x_parent) {
    Var x_k = net.part_feature(z, x_parent, enc, tv, sid);
    bool del = delta.is_deletion(sid);
    if (sid != 0)
      l_rho.push_back(
          tape.softmax_cross_entropy(net.mlp("d_type", x_k, 2), del ? 1 : 0));
    if (del) return;

    const auto& pd = std::get<PartDelta>(delta.actions[sid]);
    const Part& src = *tv.flat[sid].part;
    Part target = apply_part_delta(src, pd);
    Var raw = net.mlp("d_dbox", x_k, 10);
    auto pred = net.apply_raw(raw, src);
    Var pred_pts = tape.box_points(pred.center, pred.quat, pred.extents, kMatchGridM);
    Var gt_pts = tape.constant(flat_points(sample_box_points(target, kMatchGridM)));
    l_dp.push_back(tape.chamfer(pred_pts, gt_pts));

    if (!src.is_leaf()) {
      std::vector<const Part*> gt_children;
      for (const auto& [anchor, subtree] : added)
        if (anchor == sid) gt_children.push_back(&subtree);
      supervise(x_k, false, gt_children, tv.flat[sid].depth + 1);
    }
    for (int c : tv.kids[sid]) visit(c, x_k);
  };

  visit(0, net.zeros(config_.feature_width));

  Var sum_dp = sum_list(tape, l_dp);
  Var sum_rho = sum_list(tape, l_rho);
  Var sum_add = sum_list(tape, l_add);
  Var kl = tape.gaussian_kl(post.mean, post.logvar);
  Var total = tape.add(tape.add(tape.scale(sum_dp, config_.lambda), sum_add),
                       tape.add(sum_rho, tape.scale(kl, config_.beta)));

  LossBreakdown lb;
  lb.box_delta = tape.value(sum_dp)[0];
  lb.added = tape.value(sum_add)[0];
  lb.type = tape.value(sum_rho)[0];
  lb.kl = tape.value(kl)[0];
  lb.total = tape.value(total)[0];

  if (backward) {
    tape.backward(total);
    params_.accumulate(tape);
  }
  return lb;
}

LossBreakdown DeltaVae::loss(const ShapeTree& source, const ShapeDelta& delta,
                             const std::vector<double>& noise) const {
  return loss_impl(source, delta, noise, false);
}

LossBreakdown DeltaVae::loss_backward(const ShapeTree& source,
                                      const ShapeDelta& delta,
                                      const std::vector<double>& noise) {
  return loss_impl(source, delta, noise, true);
}

std::vector<TrainLogEntry> DeltaVae::train(const std::vector<TrainPair>& pairs,
                                           const TrainConfig& tc) {
  if (pairs.empty()) throw std::invalid_argument("no training pairs");
  Rng rng(combine_seed(config_.seed, tc.seed));
  std::vector<TrainLogEntry> logs;
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(std::uint32_t(i))]);

    int in_batch = 0;
    for (size_t oi = 0; oi < order.size(); ++oi) {
      const TrainPair& pair = pairs[order[oi]];
      std::vector<double> noise;
      if (!tc.deterministic) {
        noise.resize(config_.latent_width);
        for (double& x : noise) x = rng.normal();
      }
      LossBreakdown lb = loss_backward(*pair.source, pair.delta, noise);
      if (!std::isfinite(lb.total))
        throw std::runtime_error("non-finite loss at epoch " +
                                 std::to_string(epoch) + " step " +
                                 std::to_string(step));
      ++in_batch;
      ++step;
      if (in_batch == tc.batch_size || oi + 1 == order.size()) {
        params_.scale_grad(1.0 / in_batch);
        params_.adam_step(tc.lr);
        in_batch = 0;
      }
      if (tc.log_every > 0 && step % tc.log_every == 0)
        logs.push_back({epoch, step, lb});
    }
    if (!tc.checkpoint_path.empty()) save(tc.checkpoint_path);
  }
  return logs;
}

DecodedDelta DeltaVae::transfer(const ShapeTree& source_i,
                                const ShapeDelta& delta_ij,
                                const ShapeTree& source_k) const {
  LatentPosterior post = encode(source_i, delta_ij);
  return decode(source_k, post.mean);
}

std::vector<DecodedDelta> DeltaVae::generate(const ShapeTree& source, int count,
                                             std::uint64_t seed) const {
  std::vector<DecodedDelta> out;
  for (int i = 0; i < count; ++i)
    out.push_back(decode(source, prior_latent(combine_seed(seed, i))));
  return out;
}

std::vector<DecodedDelta> DeltaVae::interpolate(const ShapeTree& source,
                                                const ShapeDelta& delta_a,
                                                const ShapeDelta& delta_b,
                                                int steps) const {
  if (steps < 1) throw std::invalid_argument("steps must be positive");
  std::vector<double> za = encode(source, delta_a).mean;
  std::vector<double> zb = encode(source, delta_b).mean;
  std::vector<DecodedDelta> out;
  for (int s = 0; s < steps; ++s) {
    double t = steps == 1 ? 0.0 : double(s) / (steps - 1);
    std::vector<double> z(za.size());
    for (size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * za[i] + t * zb[i];
    out.push_back(decode(source, z));
  }
  return out;
}

void DeltaVae::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << vae_config_to_json(config_) << '\n';
  params_.save(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

DeltaVae DeltaVae::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truncated model file");
  DeltaVae model(vae_config_from_json(line));
  model.params_ = nn::ParameterStore::load(in);
  return model;
}

}  // namespace structedit
