#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "structedit/delta.hpp"
#include "structedit/nn.hpp"
#include "structedit/shape.hpp"

namespace structedit {

struct VaeConfig {
  int feature_width = 64;
  int latent_width = 32;
  int add_slots = 10;        // children proposed per d_add call
  int max_depth = kDefaultMaxDepth;
  bool skip_connections = true;
  bool group_norm = true;
  bool leaf_classifier = true;
  bool box_deltas = true;    // false: decoder predicts absolute boxes
  double lambda = 10.0;      // box-delta reconstruction weight
  double beta = 0.05;        // KL weight
  double mu = 20.0;          // added-part box weight
  double gamma = 0.1;        // leaf-classifier weight
  std::uint64_t seed = 0;
};

std::string vae_config_to_json(const VaeConfig& c);
VaeConfig vae_config_from_json(const std::string& text);

struct LatentPosterior {
  std::vector<double> mean;
  std::vector<double> log_variance;
};

struct DecodedDelta {
  ShapeDelta delta;
  std::vector<std::array<double, 2>> type_probs;  // per source part: delta, delete
  std::vector<double> existence_probs;            // every evaluated slot
  std::vector<double> leaf_probs;                 // per kept added part
  std::vector<std::vector<double>> label_probs;   // per kept added part
  int depth_truncations = 0;
  int pruned_labels = 0;
};

struct LossBreakdown {
  double box_delta = 0.0;   // L_dP
  double added = 0.0;       // L_P+
  double type = 0.0;        // L_rho
  double kl = 0.0;          // L_v
  double total = 0.0;
};

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 1;
  int batch_size = 16;
  bool deterministic = false;  // beta = 0, z = posterior mean
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // written after every epoch when non-empty
  int log_every = 50;           // steps between recorded loss entries
};

struct TrainLogEntry {
  int epoch = 0;
  int step = 0;
  LossBreakdown loss;
};

struct TrainPair {
  const ShapeTree* source = nullptr;
  ShapeDelta delta;
};

class DeltaVae {
 public:
  explicit DeltaVae(const VaeConfig& config);

  const VaeConfig& config() const { return config_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  LatentPosterior encode(const ShapeTree& source, const ShapeDelta& delta) const;

  std::vector<double> sample_latent(const LatentPosterior& posterior,
                                    std::uint64_t seed) const;
  std::vector<double> prior_latent(std::uint64_t seed) const;

  DecodedDelta decode(const ShapeTree& source, const std::vector<double>& z) const;

  // Teacher-forced loss of one (source, delta) pair. `noise` is the
  // reparameterization epsilon; empty means deterministic mode (z = mean).
  LossBreakdown loss(const ShapeTree& source, const ShapeDelta& delta,
                     const std::vector<double>& noise = {}) const;
  // Same, but also backpropagates into the parameter store's gradients.
  LossBreakdown loss_backward(const ShapeTree& source, const ShapeDelta& delta,
                              const std::vector<double>& noise = {});

  std::vector<TrainLogEntry> train(const std::vector<TrainPair>& pairs,
                                   const TrainConfig& config);

  DecodedDelta transfer(const ShapeTree& source_i, const ShapeDelta& delta_ij,
                        const ShapeTree& source_k) const;
  std::vector<DecodedDelta> generate(const ShapeTree& source, int count,
                                     std::uint64_t seed) const;
  std::vector<DecodedDelta> interpolate(const ShapeTree& source,
                                        const ShapeDelta& delta_a,
                                        const ShapeDelta& delta_b, int steps) const;

  void save(const std::string& path) const;
  static DeltaVae load(const std::string& path);

 private:
  LossBreakdown loss_impl(const ShapeTree& source, const ShapeDelta& delta,
                          const std::vector<double>& noise, bool backward) const;

  VaeConfig config_;
  // parameters are created lazily on first use, including from const
  // inference entry points
  mutable nn::ParameterStore params_;
};

}  // namespace structedit
