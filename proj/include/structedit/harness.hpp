#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structedit/metrics.hpp"
#include "structedit/synthgen.hpp"
#include "structedit/vae.hpp"

namespace structedit {
namespace harness {

// Per-stage seed derivation from one master seed.
std::uint64_t stage_seed(std::uint64_t master, const std::string& stage);

// A generated dataset together with its train/test group split.
struct Dataset {
  synth::DatasetConfig config;
  std::shared_ptr<const Taxonomy> taxonomy;
  std::vector<synth::SyntheticGroup> groups;
  std::vector<bool> test_flags;  // indexed by group id

  std::vector<int> group_ids(const std::string& split) const;  // train|test|all
  const synth::SyntheticGroup& group(int group_id) const;
};

Dataset make_dataset(const synth::DatasetConfig& config);
// Writes manifest.json, taxonomy.json and shapes/g###_v##.json under dir.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// One precomputed within-group edit.
struct PairRecord {
  int group_id = 0;
  int source_variant = 0;
  int target_variant = 0;
  ShapeDelta delta;
};

struct PairSet {
  std::string split = "train";
  int per_source = 0;  // 0 keeps all 95 targets per source
  std::uint64_t seed = 0;
  std::vector<PairRecord> records;
};

// All (or a per-source sample of) non-identity ordered pairs inside each
// group of the split.
PairSet build_within_group_pairs(const Dataset& dataset, const std::string& split,
                                 int per_source, std::uint64_t seed);

std::string pair_set_to_json(const PairSet& pairs);
PairSet pair_set_from_json(const std::string& text);
void write_pair_set(const PairSet& pairs, const std::string& path);
PairSet read_pair_set(const std::string& path);

// Borrowed views into the dataset's shapes; the dataset must outlive them.
std::vector<TrainPair> as_train_pairs(const Dataset& dataset, const PairSet& pairs);

// k-NN mode: one pair per (source, neighbor) edge of the table. Pairs whose
// delta computation fails are skipped and counted.
struct IndexPair {
  int source = 0;
  int target = 0;
  ShapeDelta delta;
};
std::vector<IndexPair> build_neighbor_pairs(const std::vector<const ShapeTree*>& shapes,
                                            const NeighborhoodTable& table,
                                            int* skipped = nullptr);

enum class ExperimentKind { Reconstruction, Generation, Transfer };

std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Reconstruction;
  std::string split = "test";
  bool retrieval_baseline = false;
  int per_source_targets = 10;  // within-group targets per source, 0 = all 95
  int max_sources = 0;          // evaluated sources cap, 0 = no cap
  int generation_samples = 100; // prior edits per source
  int generation_truth = 20;    // ground-truth neighbors per source
  int transfer_cases = 100;
  int retrieval_pool = 64;      // candidate training pairs for retrieval
  std::uint64_t seed = 0;
};

std::string experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const std::string& text);

struct ReportRow {
  std::string experiment;    // reconstruction | generation | transfer
  std::string system;        // model | identity | retrieval | oracle
  std::string error;         // E_r | E_q | E_c | E_qc | E_t
  std::string metric;        // geometric | structural
  std::string neighborhood;  // within_group
  std::string split;
  int k = 0;          // neighborhood size the radius was estimated from
  double radius = 0.0;
  double value = 0.0;
};

struct Report {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ReportRow> rows;

  double value(const std::string& system, const std::string& error,
               const std::string& metric) const;  // throws when absent
};

// Runs the spec's protocol over the dataset. Identity baseline rows are
// always emitted; model rows require a model; transfer adds oracle rows.
Report run_experiment(const Dataset& dataset, const ExperimentSpec& spec,
                      const DeltaVae* model);

std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);
std::string report_to_csv(const Report& report);
// Writes report.json and report.csv under dir.
void write_report(const Report& report, const std::string& dir);

// Training run description, loadable from one JSON config file.
struct TrainSpec {
  VaeConfig model;
  TrainConfig train;
  std::string split = "train";
  int per_source = 0;  // within-group pairs per source
};

std::string train_spec_to_json(const TrainSpec& spec);
TrainSpec train_spec_from_json(const std::string& text);

}  // namespace harness
}  // namespace structedit
