#include "structedit/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "structedit/sampling.hpp"
#include "structedit/shape_io.hpp"

namespace structedit {
namespace harness {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t stage_seed(std::uint64_t master, const std::string& stage) {
  return combine_seed(master, fnv1a(stage));
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string shape_file_name(int group_id, int variant) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%03d_v%02d.json", group_id, variant);
  return buf;
}

json params_to_json(const synth::GlobalParams& p) {
  return json{{"w_leg", p.w_leg},   {"h_leg", p.h_leg},   {"w_seat", p.w_seat},
              {"d_seat", p.d_seat}, {"h_seat", p.h_seat}, {"h_back", p.h_back},
              {"w_back", p.w_back}, {"d_back", p.d_back}};
}

synth::GlobalParams params_from_json(const json& j) {
  synth::GlobalParams p;
  p.w_leg = j.at("w_leg").get<double>();
  p.h_leg = j.at("h_leg").get<double>();
  p.w_seat = j.at("w_seat").get<double>();
  p.d_seat = j.at("d_seat").get<double>();
  p.h_seat = j.at("h_seat").get<double>();
  p.h_back = j.at("h_back").get<double>();
  p.w_back = j.at("w_back").get<double>();
  p.d_back = j.at("d_back").get<double>();
  return p;
}

// Distinct values from {0..n-1} \ {exclude}, deterministic order.
std::vector<int> sample_others(int n, int exclude, int count, Rng& rng) {
  std::vector<int> pool;
  pool.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != exclude) pool.push_back(i);
  if (count <= 0 || count >= int(pool.size())) return pool;
  for (int i = 0; i < count; ++i) {
    int j = i + int(rng.next_below(std::uint32_t(pool.size() - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

std::vector<int> Dataset::group_ids(const std::string& split) const {
  if (split != "train" && split != "test" && split != "all")
    throw std::invalid_argument("unknown split: " + split);
  std::vector<int> ids;
  for (const auto& g : groups) {
    bool is_test = test_flags.at(g.group_id);
    if (split == "all" || (split == "test") == is_test) ids.push_back(g.group_id);
  }
  return ids;
}

const synth::SyntheticGroup& Dataset::group(int group_id) const {
  for (const auto& g : groups)
    if (g.group_id == group_id) return g;
  throw std::out_of_range("no group " + std::to_string(group_id));
}

Dataset make_dataset(const synth::DatasetConfig& config) {
  Dataset d;
  d.config = config;
  d.taxonomy = synth::synthetic_taxonomy();
  d.groups = synth::generate_dataset(config);
  d.test_flags = synth::test_split(int(d.groups.size()),
                                   stage_seed(config.seed, "split"));
  return d;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "shapes");
  write_taxonomy(*dataset.taxonomy, (fs::path(dir) / "taxonomy.json").string());

  json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = dataset.config.seed;
  manifest["groups_per_subtype"] = dataset.config.groups_per_subtype;
  json groups = json::array();
  for (const auto& g : dataset.groups) {
    json entry;
    entry["subtype"] = synth::subtype_name(g.subtype);
    entry["group_id"] = g.group_id;
    entry["test"] = bool(dataset.test_flags.at(g.group_id));
    entry["params"] = params_to_json(g.params);
    json mask = json::array();
    for (bool b : g.transferable) mask.push_back(b);
    entry["transferable"] = mask;
    json shapes = json::array();
    for (int v = 0; v < int(g.shapes.size()); ++v) {
      std::string rel = "shapes/" + shape_file_name(g.group_id, v);
      write_shape(g.shapes[v], (fs::path(dir) / rel).string());
      shapes.push_back({{"variant", v}, {"path", rel}});
    }
    entry["shapes"] = shapes;
    groups.push_back(entry);
  }
  manifest["groups"] = groups;
  spill((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(slurp((fs::path(dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad dataset manifest: ") + e.what());
  }
  if (manifest.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported manifest format_version");

  Dataset d;
  d.config.seed = manifest.at("seed").get<std::uint64_t>();
  d.config.groups_per_subtype = manifest.at("groups_per_subtype").get<int>();
  d.taxonomy = read_taxonomy((fs::path(dir) / "taxonomy.json").string());

  int max_id = -1;
  for (const auto& entry : manifest.at("groups"))
    max_id = std::max(max_id, entry.at("group_id").get<int>());
  d.test_flags.assign(max_id + 1, false);

  for (const auto& entry : manifest.at("groups")) {
    synth::SyntheticGroup g;
    g.subtype = synth::subtype_from_name(entry.at("subtype").get<std::string>());
    g.group_id = entry.at("group_id").get<int>();
    g.params = params_from_json(entry.at("params"));
    const auto& mask = entry.at("transferable");
    if (mask.size() != g.transferable.size())
      throw std::runtime_error("bad transferable mask size");
    for (size_t i = 0; i < g.transferable.size(); ++i)
      g.transferable[i] = mask[i].get<bool>();
    d.test_flags.at(g.group_id) = entry.at("test").get<bool>();

    const auto& shapes = entry.at("shapes");
    g.shapes.resize(shapes.size());
    for (const auto& s : shapes) {
      int v = s.at("variant").get<int>();
      std::string rel = s.at("path").get<std::string>();
      g.shapes.at(v) = read_shape((fs::path(dir) / rel).string(), d.taxonomy);
    }
    d.groups.push_back(std::move(g));
  }
  return d;
}

PairSet build_within_group_pairs(const Dataset& dataset, const std::string& split,
                                 int per_source, std::uint64_t seed) {
  PairSet set;
  set.split = split;
  set.per_source = per_source;
  set.seed = seed;
  for (int gid : dataset.group_ids(split)) {
    const auto& g = dataset.group(gid);
    int n = int(g.shapes.size());
    for (int sv = 0; sv < n; ++sv) {
      Rng rng(combine_seed(stage_seed(seed, "pairs"),
                           std::uint64_t(gid) * 1000 + std::uint64_t(sv)));
      for (int tv : sample_others(n, sv, per_source, rng)) {
        PairRecord rec;
        rec.group_id = gid;
        rec.source_variant = sv;
        rec.target_variant = tv;
        rec.delta = compute_delta(g.shapes[sv], g.shapes[tv]);
        set.records.push_back(std::move(rec));
      }
    }
  }
  return set;
}

std::string pair_set_to_json(const PairSet& pairs) {
  json j;
  j["format_version"] = 1;
  j["split"] = pairs.split;
  j["per_source"] = pairs.per_source;
  j["seed"] = pairs.seed;
  json records = json::array();
  for (const auto& rec : pairs.records) {
    records.push_back({{"group_id", rec.group_id},
                       {"source_variant", rec.source_variant},
                       {"target_variant", rec.target_variant},
                       {"delta", json::parse(delta_to_json(rec.delta))}});
  }
  j["pairs"] = records;
  return j.dump();
}

PairSet pair_set_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad pair set: ") + e.what());
  }
  PairSet set;
  set.split = j.at("split").get<std::string>();
  set.per_source = j.at("per_source").get<int>();
  set.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& rec : j.at("pairs")) {
    PairRecord r;
    r.group_id = rec.at("group_id").get<int>();
    r.source_variant = rec.at("source_variant").get<int>();
    r.target_variant = rec.at("target_variant").get<int>();
    r.delta = delta_from_json(rec.at("delta").dump());
    set.records.push_back(std::move(r));
  }
  return set;
}

void write_pair_set(const PairSet& pairs, const std::string& path) {
  spill(path, pair_set_to_json(pairs) + "\n");
}

PairSet read_pair_set(const std::string& path) {
  return pair_set_from_json(slurp(path));
}

std::vector<TrainPair> as_train_pairs(const Dataset& dataset, const PairSet& pairs) {
  std::vector<TrainPair> out;
  out.reserve(pairs.records.size());
  for (const auto& rec : pairs.records) {
    const auto& g = dataset.group(rec.group_id);
    out.push_back({&g.shapes.at(rec.source_variant), rec.delta});
  }
  return out;
}

std::vector<IndexPair> build_neighbor_pairs(const std::vector<const ShapeTree*>& shapes,
                                            const NeighborhoodTable& table,
                                            int* skipped) {
  if (table.neighbors.size() != shapes.size())
    throw std::invalid_argument("neighborhood table does not match shape list");
  std::vector<IndexPair> out;
  int failed = 0;
  for (size_t s = 0; s < shapes.size(); ++s) {
    for (const Neighbor& n : table.neighbors[s]) {
      try {
        IndexPair p;
        p.source = int(s);
        p.target = n.id;
        p.delta = compute_delta(*shapes[s], *shapes[size_t(n.id)]);
        out.push_back(std::move(p));
      } catch (const std::exception&) {
        ++failed;
      }
    }
  }
  if (skipped) *skipped = failed;
  return out;
}

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Reconstruction: return "reconstruction";
    case ExperimentKind::Generation: return "generation";
    case ExperimentKind::Transfer: return "transfer";
  }
  throw std::logic_error("bad experiment kind");
}

ExperimentKind experiment_from_name(const std::string& name) {
  if (name == "reconstruction") return ExperimentKind::Reconstruction;
  if (name == "generation") return ExperimentKind::Generation;
  if (name == "transfer") return ExperimentKind::Transfer;
  throw std::invalid_argument("unknown experiment: " + name);
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["experiment"] = experiment_name(spec.kind);
  j["split"] = spec.split;
  j["retrieval_baseline"] = spec.retrieval_baseline;
  j["per_source_targets"] = spec.per_source_targets;
  j["max_sources"] = spec.max_sources;
  j["generation_samples"] = spec.generation_samples;
  j["generation_truth"] = spec.generation_truth;
  j["transfer_cases"] = spec.transfer_cases;
  j["retrieval_pool"] = spec.retrieval_pool;
  j["seed"] = spec.seed;
  return j.dump();
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad experiment spec: ") + e.what());
  }
  ExperimentSpec s;
  s.kind = experiment_from_name(j.at("experiment").get<std::string>());
  if (j.contains("split")) s.split = j.at("split").get<std::string>();
  if (j.contains("retrieval_baseline"))
    s.retrieval_baseline = j.at("retrieval_baseline").get<bool>();
  if (j.contains("per_source_targets"))
    s.per_source_targets = j.at("per_source_targets").get<int>();
  if (j.contains("max_sources")) s.max_sources = j.at("max_sources").get<int>();
  if (j.contains("generation_samples"))
    s.generation_samples = j.at("generation_samples").get<int>();
  if (j.contains("generation_truth"))
    s.generation_truth = j.at("generation_truth").get<int>();
  if (j.contains("transfer_cases"))
    s.transfer_cases = j.at("transfer_cases").get<int>();
  if (j.contains("retrieval_pool"))
    s.retrieval_pool = j.at("retrieval_pool").get<int>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

double Report::value(const std::string& system, const std::string& error,
                     const std::string& metric) const {
  for (const auto& row : rows)
    if (row.system == system && row.error == error && row.metric == metric)
      return row.value;
  throw std::out_of_range("no report row " + system + "/" + error + "/" + metric);
}

namespace {

constexpr const char* kNeighborhood = "within_group";

struct SourceRef {
  int group_id;
  int variant;
};

std::vector<SourceRef> split_sources(const Dataset& dataset,
                                     const ExperimentSpec& spec) {
  std::vector<SourceRef> sources;
  for (int gid : dataset.group_ids(spec.split)) {
    const auto& g = dataset.group(gid);
    for (int v = 0; v < int(g.shapes.size()); ++v) sources.push_back({gid, v});
  }
  if (spec.max_sources > 0 && spec.max_sources < int(sources.size())) {
    Rng rng(stage_seed(spec.seed, "sources"));
    for (int i = 0; i < spec.max_sources; ++i) {
      int j = i + int(rng.next_below(std::uint32_t(sources.size() - i)));
      std::swap(sources[i], sources[j]);
    }
    sources.resize(spec.max_sources);
    std::sort(sources.begin(), sources.end(), [](SourceRef a, SourceRef b) {
      return a.group_id != b.group_id ? a.group_id < b.group_id
                                      : a.variant < b.variant;
    });
  }
  return sources;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

ShapeTree model_reconstruction(const DeltaVae& model, const ShapeTree& source,
                               const ShapeDelta& delta) {
  LatentPosterior post = model.encode(source, delta);
  DecodedDelta decoded = model.decode(source, post.mean);
  return apply_delta(source, decoded.delta);
}

void run_reconstruction(const Dataset& dataset, const ExperimentSpec& spec,
                        const DeltaVae* model, Report& report) {
  struct EvalPair {
    const ShapeTree* source;
    const ShapeTree* target;
    ShapeDelta delta;
  };
  std::vector<EvalPair> pairs;
  for (SourceRef s : split_sources(dataset, spec)) {
    const auto& g = dataset.group(s.group_id);
    Rng rng(combine_seed(stage_seed(spec.seed, "targets"),
                         std::uint64_t(s.group_id) * 1000 + std::uint64_t(s.variant)));
    for (int tv : sample_others(int(g.shapes.size()), s.variant,
                                spec.per_source_targets, rng)) {
      EvalPair p;
      p.source = &g.shapes[s.variant];
      p.target = &g.shapes[tv];
      p.delta = compute_delta(*p.source, *p.target);
      pairs.push_back(std::move(p));
    }
  }
  if (pairs.empty()) throw std::runtime_error("no evaluation pairs");

  std::deque<ShapeTree> store;
  std::vector<std::pair<const ShapeTree*, const ShapeTree*>> identity, predicted,
      retrieved;
  for (const auto& p : pairs) {
    identity.push_back({p.target, p.source});
    if (model) {
      store.push_back(model_reconstruction(*model, *p.source, p.delta));
      predicted.push_back({p.target, &store.back()});
    }
  }

  if (spec.retrieval_baseline) {
    // Copy the training delta whose endpoints are closest under a coarse
    // point cloud distance; fall back to the source when it does not bind.
    struct Candidate {
      const ShapeTree* source;
      ShapeDelta delta;
      PointSet source_cloud, target_cloud;
    };
    std::vector<Candidate> candidates;
    auto train_ids = dataset.group_ids("train");
    if (!train_ids.empty()) {
      Rng rng(stage_seed(spec.seed, "retrieval"));
      int pool = std::max(1, spec.retrieval_pool);
      for (int i = 0; i < pool; ++i) {
        const auto& g = dataset.group(train_ids[rng.next_below(
            std::uint32_t(train_ids.size()))]);
        int n = int(g.shapes.size());
        int a = int(rng.next_below(std::uint32_t(n)));
        int b = int(rng.next_below(std::uint32_t(n - 1)));
        if (b >= a) ++b;
        Candidate c;
        c.source = &g.shapes[a];
        c.delta = compute_delta(g.shapes[a], g.shapes[b]);
        c.source_cloud = sample_shape_points(
            g.shapes[a], 256, shape_sample_seed(dataset.config.seed, g.shapes[a]));
        c.target_cloud = sample_shape_points(
            g.shapes[b], 256, shape_sample_seed(dataset.config.seed, g.shapes[b]));
        candidates.push_back(std::move(c));
      }
    }
    for (const auto& p : pairs) {
      const ShapeTree* pred = p.source;
      if (!candidates.empty()) {
        PointSet sc = sample_shape_points(
            *p.source, 256, shape_sample_seed(dataset.config.seed, *p.source));
        PointSet tc = sample_shape_points(
            *p.target, 256, shape_sample_seed(dataset.config.seed, *p.target));
        const Candidate* best = nullptr;
        double best_score = 0.0;
        for (const auto& c : candidates) {
          double score = chamfer_distance(sc, c.source_cloud) +
                         chamfer_distance(tc, c.target_cloud);
          if (!best || score < best_score) {
            best = &c;
            best_score = score;
          }
        }
        if (int(best->delta.actions.size()) == count_parts(p.source->root)) {
          try {
            ShapeDelta copied = best->delta;
            copied.source_hash = shape_hash(*p.source);
            store.push_back(apply_delta(*p.source, copied));
            pred = &store.back();
          } catch (const std::exception&) {
            pred = p.source;
          }
        }
      }
      retrieved.push_back({p.target, pred});
    }
  }

  int k = spec.per_source_targets > 0 ? spec.per_source_targets : 95;
  for (Metric m : {Metric::Geometric, Metric::Structural}) {
    double radius = 0.0;
    for (const auto& p : pairs)
      radius += shape_distance(m, *p.source, *p.target, dataset.config.seed);
    radius /= double(pairs.size());

    auto emit = [&](const std::string& system, const auto& preds) {
      double e = reconstruction_error(preds, radius, m, dataset.config.seed);
      report.rows.push_back({"reconstruction", system, "E_r", metric_name(m),
                             kNeighborhood, spec.split, k, radius, e});
    };
    emit("identity", identity);
    if (model) emit("model", predicted);
    if (spec.retrieval_baseline) emit("retrieval", retrieved);
  }
}

void run_generation(const Dataset& dataset, const ExperimentSpec& spec,
                    const DeltaVae* model, Report& report) {
  auto sources = split_sources(dataset, spec);
  if (sources.empty()) throw std::runtime_error("no sources in split");

  std::deque<ShapeTree> store;
  std::vector<std::vector<const ShapeTree*>> truth, model_gen, identity_gen;
  for (SourceRef s : sources) {
    const auto& g = dataset.group(s.group_id);
    const ShapeTree& src = g.shapes[s.variant];
    std::uint64_t sid = std::uint64_t(s.group_id) * 1000 + std::uint64_t(s.variant);

    Rng rng(combine_seed(stage_seed(spec.seed, "truth"), sid));
    std::vector<const ShapeTree*> gt;
    for (int tv : sample_others(int(g.shapes.size()), s.variant,
                                spec.generation_truth, rng))
      gt.push_back(&g.shapes[tv]);
    truth.push_back(std::move(gt));

    identity_gen.push_back({&src});
    if (model) {
      // one fixed sampling seed per source shape
      auto decoded = model->generate(src, spec.generation_samples,
                                     combine_seed(stage_seed(spec.seed, "generate"), sid));
      std::vector<const ShapeTree*> gen;
      for (const auto& d : decoded) {
        store.push_back(apply_delta(src, d.delta));
        gen.push_back(&store.back());
      }
      model_gen.push_back(std::move(gen));
    }
  }

  int k = spec.generation_truth > 0 ? spec.generation_truth : 95;
  for (Metric m : {Metric::Geometric, Metric::Structural}) {
    double radius = 0.0;
    int n = 0;
    for (size_t s = 0; s < sources.size(); ++s) {
      const auto& g = dataset.group(sources[s].group_id);
      for (const ShapeTree* t : truth[s]) {
        radius += shape_distance(m, g.shapes[sources[s].variant], *t,
                                 dataset.config.seed);
        ++n;
      }
    }
    radius /= double(n);

    auto emit = [&](const std::string& system,
                    const std::vector<std::vector<const ShapeTree*>>& gen) {
      GenerationErrors e = generation_errors(gen, truth, radius, m, dataset.config.seed);
      auto push = [&](const std::string& error, double v) {
        report.rows.push_back({"generation", system, error, metric_name(m),
                               kNeighborhood, spec.split, k, radius, v});
      };
      push("E_q", e.quality);
      push("E_c", e.coverage);
      push("E_qc", e.combined);
    };
    emit("identity", identity_gen);
    if (model) emit("model", model_gen);
  }
}

void run_transfer(const Dataset& dataset, const ExperimentSpec& spec,
                  const DeltaVae* model, Report& report) {
  auto gids = dataset.group_ids(spec.split);
  if (gids.size() < 2) throw std::runtime_error("transfer needs at least two groups");

  struct Case {
    const synth::SyntheticGroup* a;
    const synth::SyntheticGroup* b;
    int i, j;
    ShapeDelta gt, model_pred, identity_pred;
    double radius_sample[2];  // within-group distance probe per metric
  };
  Rng rng(stage_seed(spec.seed, "transfer"));
  std::vector<Case> cases;
  for (int c = 0; c < spec.transfer_cases; ++c) {
    int ai = int(rng.next_below(std::uint32_t(gids.size())));
    int bi = int(rng.next_below(std::uint32_t(gids.size() - 1)));
    if (bi >= ai) ++bi;
    Case k;
    k.a = &dataset.group(gids[ai]);
    k.b = &dataset.group(gids[bi]);
    int n = int(k.a->shapes.size());
    k.i = int(rng.next_below(std::uint32_t(n)));
    k.j = int(rng.next_below(std::uint32_t(n - 1)));
    if (k.j >= k.i) ++k.j;
    int t = int(rng.next_below(std::uint32_t(n - 1)));
    if (t >= k.i) ++t;

    k.gt = synth::ground_truth_transfer(*k.a, k.i, k.j, *k.b);
    k.identity_pred = identity_delta(k.b->shapes[k.i]);
    if (model) {
      ShapeDelta dij = compute_delta(k.a->shapes[k.i], k.a->shapes[k.j]);
      k.model_pred =
          model->transfer(k.a->shapes[k.i], dij, k.b->shapes[k.i]).delta;
    }
    for (Metric m : {Metric::Geometric, Metric::Structural})
      k.radius_sample[int(m)] = shape_distance(m, k.b->shapes[k.i], k.b->shapes[t],
                                               dataset.config.seed);
    cases.push_back(std::move(k));
  }

  for (Metric m : {Metric::Geometric, Metric::Structural}) {
    double radius = 0.0;
    for (const auto& c : cases) radius += c.radius_sample[int(m)];
    radius /= double(cases.size());

    auto emit = [&](const std::string& system,
                    const std::function<const ShapeDelta&(const Case&)>& pred) {
      double e = 0.0;
      for (const auto& c : cases)
        e += transfer_error(c.b->shapes[c.i], pred(c), c.gt, radius, m,
                            dataset.config.seed);
      e /= double(cases.size());
      report.rows.push_back({"transfer", system, "E_t", metric_name(m),
                             kNeighborhood, spec.split, 95, radius, e});
    };
    emit("identity", [](const Case& c) -> const ShapeDelta& { return c.identity_pred; });
    emit("oracle", [](const Case& c) -> const ShapeDelta& { return c.gt; });
    if (model)
      emit("model", [](const Case& c) -> const ShapeDelta& { return c.model_pred; });
  }
}

}  // namespace

Report run_experiment(const Dataset& dataset, const ExperimentSpec& spec,
                      const DeltaVae* model) {
  Report report;
  report.seed = spec.seed;
  report.config_hash = hash_hex(combine_seed(
      combine_seed(fnv1a(experiment_spec_to_json(spec)), dataset.config.seed),
      std::uint64_t(dataset.groups.size())));

  switch (spec.kind) {
    case ExperimentKind::Reconstruction:
      run_reconstruction(dataset, spec, model, report);
      break;
    case ExperimentKind::Generation:
      run_generation(dataset, spec, model, report);
      break;
    case ExperimentKind::Transfer:
      run_transfer(dataset, spec, model, report);
      break;
  }
  return report;
}

namespace {

json row_to_json(const ReportRow& r) {
  return json{{"experiment", r.experiment}, {"system", r.system},
              {"error", r.error},           {"metric", r.metric},
              {"neighborhood", r.neighborhood},
              {"split", r.split},           {"k", r.k},
              {"radius", r.radius},         {"value", r.value}};
}

}  // namespace

std::string report_to_json(const Report& report) {
  json j;
  j["format_version"] = 1;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_to_json(r));
  j["rows"] = rows;
  return j.dump(2);
}

Report report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad report: ") + e.what());
  }
  Report report;
  report.config_hash = j.at("config_hash").get<std::string>();
  report.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.experiment = r.at("experiment").get<std::string>();
    row.system = r.at("system").get<std::string>();
    row.error = r.at("error").get<std::string>();
    row.metric = r.at("metric").get<std::string>();
    row.neighborhood = r.at("neighborhood").get<std::string>();
    row.split = r.at("split").get<std::string>();
    row.k = r.at("k").get<int>();
    row.radius = r.at("radius").get<double>();
    row.value = r.at("value").get<double>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_csv(const Report& report) {
  std::string out = "experiment,system,error,metric,neighborhood,split,k,radius,value\n";
  char buf[64];
  for (const auto& r : report.rows) {
    out += r.experiment + ',' + r.system + ',' + r.error + ',' + r.metric + ',' +
           r.neighborhood + ',' + r.split + ',' + std::to_string(r.k) + ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.radius);
    out += buf;
    out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += buf;
    out += '\n';
  }
  return out;
}

void write_report(const Report& report, const std::string& dir) {
  fs::create_directories(dir);
  spill((fs::path(dir) / "report.json").string(), report_to_json(report) + "\n");
  spill((fs::path(dir) / "report.csv").string(), report_to_csv(report));
}

std::string train_spec_to_json(const TrainSpec& spec) {
  json j;
  j["model"] = json::parse(vae_config_to_json(spec.model));
  j["train"] = {{"lr", spec.train.lr},
                {"epochs", spec.train.epochs},
                {"batch_size", spec.train.batch_size},
                {"deterministic", spec.train.deterministic},
                {"seed", spec.train.seed},
                {"checkpoint_path", spec.train.checkpoint_path},
                {"log_every", spec.train.log_every}};
  j["split"] = spec.split;
  j["per_source"] = spec.per_source;
  return j.dump(2);
}

TrainSpec train_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad train spec: ") + e.what());
  }
  TrainSpec spec;
  if (j.contains("model")) spec.model = vae_config_from_json(j.at("model").dump());
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("lr")) spec.train.lr = t.at("lr").get<double>();
    if (t.contains("epochs")) spec.train.epochs = t.at("epochs").get<int>();
    if (t.contains("batch_size")) spec.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("deterministic"))
      spec.train.deterministic = t.at("deterministic").get<bool>();
    if (t.contains("seed")) spec.train.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("checkpoint_path"))
      spec.train.checkpoint_path = t.at("checkpoint_path").get<std::string>();
    if (t.contains("log_every")) spec.train.log_every = t.at("log_every").get<int>();
  }
  if (j.contains("split")) spec.split = j.at("split").get<std::string>();
  if (j.contains("per_source")) spec.per_source = j.at("per_source").get<int>();
  return spec;
}

}  // namespace harness
}  // namespace structedit
