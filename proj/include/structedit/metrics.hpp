#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structedit/delta.hpp"
#include "structedit/shape.hpp"

namespace structedit {

enum class Metric { Geometric, Structural };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

// Per-shape sampling seed, derived from the dataset seed and the shape's
// serialized content. Identical shapes sample identical point clouds, so
// self-distances are exactly zero.
std::uint64_t shape_sample_seed(std::uint64_t dataset_seed, const ShapeTree& shape);

// Chamfer distance between 2048-point samples of the two shapes' leaf boxes.
double geometric_distance(const ShapeTree& a, const ShapeTree& b,
                          std::uint64_t dataset_seed);

// Unmatched part count of both shapes divided by the part count of `a`.
double structural_distance(const ShapeTree& a, const ShapeTree& b);

// Distance under the given metric.
double shape_distance(Metric metric, const ShapeTree& a, const ShapeTree& b,
                      std::uint64_t dataset_seed);

struct Neighbor {
  int id;
  double distance;
};

struct NeighborhoodTable {
  Metric metric = Metric::Geometric;
  int k = 0;
  double radius = 0.0;  // r_N, mean over all (source, neighbor) distances
  std::vector<std::vector<Neighbor>> neighbors;  // per source, ascending distance
};

// Exact k-NN by exhaustive pairwise distances, excluding self. Lists are
// truncated to size-1 when k exceeds it.
NeighborhoodTable build_neighborhoods(const std::vector<const ShapeTree*>& shapes,
                                      int k, Metric metric, std::uint64_t dataset_seed);

std::string neighborhood_table_to_json(const NeighborhoodTable& table);
NeighborhoodTable neighborhood_table_from_json(const std::string& text);
void write_neighborhood_table(const NeighborhoodTable& table, const std::string& path);
NeighborhoodTable read_neighborhood_table(const std::string& path);

// E_r: mean over (target, predicted target) pairs of d(...) / r_N.
double reconstruction_error(
    const std::vector<std::pair<const ShapeTree*, const ShapeTree*>>& pairs,
    double radius, Metric metric, std::uint64_t dataset_seed);

struct GenerationErrors {
  double quality = 0.0;   // E_q
  double coverage = 0.0;  // E_c
  double combined = 0.0;  // E_qc, per-source sum of both, averaged
};

// Per source: `generated[s]` are shapes produced by applying sampled edits
// to source s; `truth[s]` are the ground-truth neighbor shapes.
GenerationErrors generation_errors(
    const std::vector<std::vector<const ShapeTree*>>& generated,
    const std::vector<std::vector<const ShapeTree*>>& truth, double radius,
    Metric metric, std::uint64_t dataset_seed);

// E_t: d(S_k + gt_delta, S_k + predicted_delta) / r_N.
double transfer_error(const ShapeTree& source_k, const ShapeDelta& predicted,
                      const ShapeDelta& ground_truth, double radius, Metric metric,
                      std::uint64_t dataset_seed);

}  // namespace structedit
