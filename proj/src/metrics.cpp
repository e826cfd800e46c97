#include "structedit/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "structedit/sampling.hpp"
#include "structedit/shape_io.hpp"

namespace structedit {

using nlohmann::json;

std::string metric_name(Metric m) {
  return m == Metric::Geometric ? "geometric" : "structural";
}

Metric metric_from_name(const std::string& name) {
  if (name == "geometric") return Metric::Geometric;
  if (name == "structural") return Metric::Structural;
  throw std::invalid_argument("unknown metric: " + name);
}

std::uint64_t shape_sample_seed(std::uint64_t dataset_seed, const ShapeTree& shape) {
  return combine_seed(dataset_seed, fnv1a(shape_to_json(shape)));
}

double geometric_distance(const ShapeTree& a, const ShapeTree& b,
                          std::uint64_t dataset_seed) {
  PointSet pa = sample_shape_points(a, kShapeSampleCount, shape_sample_seed(dataset_seed, a));
  PointSet pb = sample_shape_points(b, kShapeSampleCount, shape_sample_seed(dataset_seed, b));
  return chamfer_distance(pa, pb);
}

double structural_distance(const ShapeTree& a, const ShapeTree& b) {
  PartMatching m = match_shapes(a, b);
  int unmatched = int(m.unmatched_source.size() + m.unmatched_target.size());
  return double(unmatched) / double(count_parts(a.root));
}

double shape_distance(Metric metric, const ShapeTree& a, const ShapeTree& b,
                      std::uint64_t dataset_seed) {
  return metric == Metric::Geometric ? geometric_distance(a, b, dataset_seed)
                                     : structural_distance(a, b);
}

NeighborhoodTable build_neighborhoods(const std::vector<const ShapeTree*>& shapes,
                                      int k, Metric metric,
                                      std::uint64_t dataset_seed) {
  int n = int(shapes.size());
  if (k >= n) k = n - 1;
  if (k < 1) throw std::invalid_argument("need at least two shapes for neighborhoods");

  NeighborhoodTable table;
  table.metric = metric;
  table.k = k;
  table.neighbors.resize(n);

  // point clouds are sampled once per shape for the geometric metric
  std::vector<PointSet> clouds;
  if (metric == Metric::Geometric) {
    clouds.reserve(n);
    for (const ShapeTree* s : shapes)
      clouds.push_back(
          sample_shape_points(*s, kShapeSampleCount, shape_sample_seed(dataset_seed, *s)));
  }

  std::vector<std::vector<double>> dist(n);
  for (int i = 0; i < n; ++i) dist[i].assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (metric == Metric::Geometric) {
        double d = chamfer_distance(clouds[i], clouds[j]);
        dist[i][j] = dist[j][i] = d;
      } else {
        // same unmatched count both ways, different normalizer
        PartMatching m = match_shapes(*shapes[i], *shapes[j]);
        double u = double(m.unmatched_source.size() + m.unmatched_target.size());
        dist[i][j] = u / double(count_parts(shapes[i]->root));
        dist[j][i] = u / double(count_parts(shapes[j]->root));
      }
    }
  }

  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    order.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return dist[i][a] != dist[i][b] ? dist[i][a] < dist[i][b] : a < b;
    });
    order.resize(k);
    for (int j : order) {
      table.neighbors[i].push_back({j, dist[i][j]});
      sum += dist[i][j];
      ++count;
    }
  }
  table.radius = sum / double(count);
  return table;
}

std::string neighborhood_table_to_json(const NeighborhoodTable& table) {
  json j;
  j["format_version"] = 1;
  j["metric"] = metric_name(table.metric);
  j["k"] = table.k;
  j["radius"] = table.radius;
  json rows = json::array();
  for (const auto& row : table.neighbors) {
    json r = json::array();
    for (const Neighbor& nb : row) r.push_back(json::array({nb.id, nb.distance}));
    rows.push_back(r);
  }
  j["neighbors"] = rows;
  return j.dump();
}

NeighborhoodTable neighborhood_table_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("neighborhood table parse error: ") + e.what());
  }
  NeighborhoodTable table;
  table.metric = metric_from_name(j.at("metric").get<std::string>());
  table.k = j.at("k").get<int>();
  table.radius = j.at("radius").get<double>();
  for (const json& row : j.at("neighbors")) {
    std::vector<Neighbor> r;
    for (const json& nb : row) r.push_back({nb[0].get<int>(), nb[1].get<double>()});
    table.neighbors.push_back(std::move(r));
  }
  return table;
}

void write_neighborhood_table(const NeighborhoodTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write neighborhood table: " + path);
  out << neighborhood_table_to_json(table) << "\n";
}

NeighborhoodTable read_neighborhood_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open neighborhood table: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return neighborhood_table_from_json(ss.str());
}

double reconstruction_error(
    const std::vector<std::pair<const ShapeTree*, const ShapeTree*>>& pairs,
    double radius, Metric metric, std::uint64_t dataset_seed) {
  if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
  if (pairs.empty()) throw std::invalid_argument("no pairs");
  double sum = 0.0;
  for (const auto& [truth, predicted] : pairs)
    sum += shape_distance(metric, *truth, *predicted, dataset_seed);
  return sum / (radius * double(pairs.size()));
}

GenerationErrors generation_errors(
    const std::vector<std::vector<const ShapeTree*>>& generated,
    const std::vector<std::vector<const ShapeTree*>>& truth, double radius,
    Metric metric, std::uint64_t dataset_seed) {
  if (generated.size() != truth.size())
    throw std::invalid_argument("per-source list sizes differ");
  if (generated.empty()) throw std::invalid_argument("no sources");

  GenerationErrors e;
  int n_sources = int(generated.size());
  for (int s = 0; s < n_sources; ++s) {
    const auto& gen = generated[s];
    const auto& gt = truth[s];
    if (gen.empty()) throw std::invalid_argument("empty generated sample set");
    if (gt.empty()) throw std::invalid_argument("empty ground truth set");
    std::vector<std::vector<double>> d(gen.size(), std::vector<double>(gt.size()));
    for (size_t a = 0; a < gen.size(); ++a)
      for (size_t b = 0; b < gt.size(); ++b)
        d[a][b] = shape_distance(metric, *gen[a], *gt[b], dataset_seed);
    double q = 0.0;
    for (size_t a = 0; a < gen.size(); ++a)
      q += *std::min_element(d[a].begin(), d[a].end());
    q /= double(gen.size());
    double c = 0.0;
    for (size_t b = 0; b < gt.size(); ++b) {
      double best = std::numeric_limits<double>::infinity();
      for (size_t a = 0; a < gen.size(); ++a) best = std::min(best, d[a][b]);
      c += best;
    }
    c /= double(gt.size());
    e.quality += q;
    e.coverage += c;
    e.combined += q + c;
  }
  double norm = radius * double(n_sources);
  e.quality /= norm;
  e.coverage /= norm;
  e.combined /= norm;
  return e;
}

double transfer_error(const ShapeTree& source_k, const ShapeDelta& predicted,
                      const ShapeDelta& ground_truth, double radius, Metric metric,
                      std::uint64_t dataset_seed) {
  ShapeTree truth = apply_delta(source_k, ground_truth);
  ShapeTree pred = apply_delta(source_k, predicted);
  return shape_distance(metric, truth, pred, dataset_seed) / radius;
}

}  // namespace structedit
