#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "structedit/delta.hpp"
#include "structedit/harness.hpp"
#include "structedit/metrics.hpp"
#include "structedit/shape_io.hpp"
#include "structedit/synthgen.hpp"
#include "structedit/vae.hpp"

namespace se = structedit;
namespace fs = std::filesystem;
using nlohmann::json;

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

se::ShapeTree load_shape(const std::string& path, const std::string& taxonomy_path) {
  return se::read_shape(path, se::read_taxonomy(taxonomy_path));
}

std::vector<const se::ShapeTree*> split_shape_list(const se::harness::Dataset& dataset,
                                                   const std::string& split) {
  std::vector<const se::ShapeTree*> shapes;
  for (int gid : dataset.group_ids(split))
    for (const auto& s : dataset.group(gid).shapes) shapes.push_back(&s);
  return shapes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical shape edit toolkit"};
  app.require_subcommand(1);

  // synth-gen
  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate the synthetic dataset");
  int sg_groups = 10;
  std::uint64_t sg_seed = 0;
  std::string sg_out;
  synth_cmd->add_option("--groups", sg_groups, "Groups per subtype");
  synth_cmd->add_option("--seed", sg_seed, "Master seed");
  synth_cmd->add_option("--out", sg_out, "Output directory")->required();

  // neighbors
  auto* nb_cmd = app.add_subcommand("neighbors", "Build a k-NN table over a split");
  std::string nb_dataset, nb_metric = "geometric", nb_split = "test", nb_out;
  int nb_k = 20;
  nb_cmd->add_option("--dataset", nb_dataset, "Dataset directory")->required();
  nb_cmd->add_option("--metric", nb_metric, "geometric | structural");
  nb_cmd->add_option("--k", nb_k, "Neighbors per shape");
  nb_cmd->add_option("--split", nb_split, "train | test | all");
  nb_cmd->add_option("--out", nb_out, "Output table file")->required();

  // pairs
  auto* pr_cmd = app.add_subcommand("pairs", "Precompute within-group edit pairs");
  std::string pr_dataset, pr_split = "train", pr_out;
  int pr_per_source = 0;
  std::uint64_t pr_seed = 0;
  pr_cmd->add_option("--dataset", pr_dataset, "Dataset directory")->required();
  pr_cmd->add_option("--split", pr_split, "train | test | all");
  pr_cmd->add_option("--per-source", pr_per_source, "Targets per source, 0 = all");
  pr_cmd->add_option("--seed", pr_seed, "Sampling seed");
  pr_cmd->add_option("--out", pr_out, "Output pair file")->required();

  // delta
  auto* dl_cmd = app.add_subcommand("delta", "Compute the edit between two shapes");
  std::string dl_source, dl_target, dl_tax, dl_out;
  dl_cmd->add_option("--source", dl_source)->required();
  dl_cmd->add_option("--target", dl_target)->required();
  dl_cmd->add_option("--taxonomy", dl_tax)->required();
  dl_cmd->add_option("--out", dl_out)->required();

  // apply
  auto* ap_cmd = app.add_subcommand("apply", "Apply an edit to a source shape");
  std::string ap_source, ap_delta, ap_tax, ap_out;
  ap_cmd->add_option("--source", ap_source)->required();
  ap_cmd->add_option("--delta", ap_delta)->required();
  ap_cmd->add_option("--taxonomy", ap_tax)->required();
  ap_cmd->add_option("--out", ap_out)->required();

  // match
  auto* mt_cmd = app.add_subcommand("match", "Match parts of two shapes");
  std::string mt_source, mt_target, mt_tax, mt_out;
  mt_cmd->add_option("--source", mt_source)->required();
  mt_cmd->add_option("--target", mt_target)->required();
  mt_cmd->add_option("--taxonomy", mt_tax)->required();
  mt_cmd->add_option("--out", mt_out, "Output file, stdout when omitted");

  // dist
  auto* ds_cmd = app.add_subcommand("dist", "Distance between two shapes");
  std::string ds_a, ds_b, ds_tax, ds_metric = "geometric";
  std::uint64_t ds_seed = 0;
  ds_cmd->add_option("--a", ds_a)->required();
  ds_cmd->add_option("--b", ds_b)->required();
  ds_cmd->add_option("--taxonomy", ds_tax)->required();
  ds_cmd->add_option("--metric", ds_metric, "geometric | structural");
  ds_cmd->add_option("--seed", ds_seed, "Point sampling seed");

  // train
  auto* tr_cmd = app.add_subcommand("train", "Train the edit model");
  std::string tr_dataset, tr_config, tr_pairs, tr_out, tr_log;
  tr_cmd->add_option("--dataset", tr_dataset, "Dataset directory")->required();
  tr_cmd->add_option("--config", tr_config, "Training spec file")->required();
  tr_cmd->add_option("--pairs", tr_pairs, "Precomputed pair file");
  tr_cmd->add_option("--out", tr_out, "Model checkpoint path")->required();
  tr_cmd->add_option("--log", tr_log, "Line-delimited JSON training log");

  // reconstruct
  auto* rc_cmd = app.add_subcommand("reconstruct", "Round trip an edit through the model");
  std::string rc_model, rc_source, rc_delta, rc_tax, rc_out, rc_apply;
  rc_cmd->add_option("--model", rc_model)->required();
  rc_cmd->add_option("--source", rc_source)->required();
  rc_cmd->add_option("--delta", rc_delta)->required();
  rc_cmd->add_option("--taxonomy", rc_tax)->required();
  rc_cmd->add_option("--out", rc_out, "Decoded delta file")->required();
  rc_cmd->add_option("--apply", rc_apply, "Also write the edited shape here");

  // generate
  auto* gn_cmd = app.add_subcommand("generate", "Sample edits from the prior");
  std::string gn_model, gn_source, gn_tax, gn_out;
  int gn_count = 10;
  std::uint64_t gn_seed = 0;
  gn_cmd->add_option("--model", gn_model)->required();
  gn_cmd->add_option("--source", gn_source)->required();
  gn_cmd->add_option("--taxonomy", gn_tax)->required();
  gn_cmd->add_option("--count", gn_count, "Edits to sample");
  gn_cmd->add_option("--seed", gn_seed, "Sampling seed");
  gn_cmd->add_option("--out", gn_out, "Output directory")->required();

  // transfer
  auto* tf_cmd = app.add_subcommand("transfer", "Adapt an edit to another shape");
  std::string tf_model, tf_source, tf_delta, tf_target_source, tf_tax, tf_out;
  tf_cmd->add_option("--model", tf_model)->required();
  tf_cmd->add_option("--source", tf_source, "Shape the delta is bound to")->required();
  tf_cmd->add_option("--delta", tf_delta)->required();
  tf_cmd->add_option("--target-source", tf_target_source, "Shape to edit")->required();
  tf_cmd->add_option("--taxonomy", tf_tax)->required();
  tf_cmd->add_option("--out", tf_out, "Decoded delta file")->required();

  // interpolate
  auto* ip_cmd = app.add_subcommand("interpolate", "Interpolate between two edits");
  std::string ip_model, ip_source, ip_a, ip_b, ip_tax, ip_out;
  int ip_steps = 5;
  ip_cmd->add_option("--model", ip_model)->required();
  ip_cmd->add_option("--source", ip_source)->required();
  ip_cmd->add_option("--delta-a", ip_a)->required();
  ip_cmd->add_option("--delta-b", ip_b)->required();
  ip_cmd->add_option("--taxonomy", ip_tax)->required();
  ip_cmd->add_option("--steps", ip_steps, "Interpolation steps");
  ip_cmd->add_option("--out", ip_out, "Output directory")->required();

  // eval
  auto* ev_cmd = app.add_subcommand("eval", "Run an evaluation protocol");
  std::string ev_dataset, ev_experiment, ev_config, ev_model, ev_out;
  bool ev_retrieval = false;
  bool ev_seed_set = false;
  std::uint64_t ev_seed = 0;
  ev_cmd->add_option("--dataset", ev_dataset, "Dataset directory")->required();
  ev_cmd->add_option("--experiment", ev_experiment,
                     "reconstruction | generation | transfer");
  ev_cmd->add_option("--config", ev_config, "Experiment spec file");
  ev_cmd->add_option("--model", ev_model, "Model checkpoint");
  ev_cmd->add_flag("--retrieval", ev_retrieval, "Include the retrieval baseline");
  ev_cmd->add_option("--seed", ev_seed, "Master seed")
      ->each([&](const std::string&) { ev_seed_set = true; });
  ev_cmd->add_option("--out", ev_out, "Report directory")->required();

  // report
  auto* rp_cmd = app.add_subcommand("report", "Print a report as CSV");
  std::string rp_in;
  rp_cmd->add_option("--in", rp_in, "report.json path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) {
      se::synth::DatasetConfig cfg;
      cfg.groups_per_subtype = sg_groups;
      cfg.seed = sg_seed;
      se::harness::save_dataset(se::harness::make_dataset(cfg), sg_out);
    } else if (*nb_cmd) {
      auto dataset = se::harness::load_dataset(nb_dataset);
      auto shapes = split_shape_list(dataset, nb_split);
      auto table = se::build_neighborhoods(shapes, nb_k,
                                           se::metric_from_name(nb_metric),
                                           dataset.config.seed);
      se::write_neighborhood_table(table, nb_out);
    } else if (*pr_cmd) {
      auto dataset = se::harness::load_dataset(pr_dataset);
      auto pairs = se::harness::build_within_group_pairs(dataset, pr_split,
                                                         pr_per_source, pr_seed);
      se::harness::write_pair_set(pairs, pr_out);
    } else if (*dl_cmd) {
      auto tax = se::read_taxonomy(dl_tax);
      auto source = se::read_shape(dl_source, tax);
      auto target = se::read_shape(dl_target, tax);
      se::write_delta(se::compute_delta(source, target), dl_out);
    } else if (*ap_cmd) {
      auto source = load_shape(ap_source, ap_tax);
      auto delta = se::read_delta(ap_delta);
      se::write_shape(se::apply_delta(source, delta), ap_out);
    } else if (*mt_cmd) {
      auto tax = se::read_taxonomy(mt_tax);
      auto source = se::read_shape(mt_source, tax);
      auto target = se::read_shape(mt_target, tax);
      auto matching = se::match_shapes(source, target);
      json j;
      json pairs = json::array();
      for (auto [s, t] : matching.pairs) pairs.push_back({s, t});
      j["pairs"] = pairs;
      j["unmatched_source"] = matching.unmatched_source;
      j["unmatched_target"] = matching.unmatched_target;
      j["total_cost"] = matching.total_cost;
      if (mt_out.empty())
        std::cout << j.dump(2) << "\n";
      else
        spill(mt_out, j.dump(2) + "\n");
    } else if (*ds_cmd) {
      auto tax = se::read_taxonomy(ds_tax);
      auto a = se::read_shape(ds_a, tax);
      auto b = se::read_shape(ds_b, tax);
      double d = se::shape_distance(se::metric_from_name(ds_metric), a, b, ds_seed);
      std::printf("%.17g\n", d);
    } else if (*tr_cmd) {
      auto dataset = se::harness::load_dataset(tr_dataset);
      auto spec = se::harness::train_spec_from_json(slurp(tr_config));
      se::harness::PairSet pairs =
          tr_pairs.empty()
              ? se::harness::build_within_group_pairs(dataset, spec.split,
                                                      spec.per_source,
                                                      spec.train.seed)
              : se::harness::read_pair_set(tr_pairs);
      auto train_pairs = se::harness::as_train_pairs(dataset, pairs);
      se::DeltaVae model(spec.model);
      auto log = model.train(train_pairs, spec.train);
      model.save(tr_out);
      if (!tr_log.empty()) {
        std::string lines;
        for (const auto& e : log) {
          json j{{"epoch", e.epoch},
                 {"step", e.step},
                 {"loss",
                  {{"box_delta", e.loss.box_delta},
                   {"added", e.loss.added},
                   {"type", e.loss.type},
                   {"kl", e.loss.kl},
                   {"total", e.loss.total}}}};
          lines += j.dump() + "\n";
        }
        spill(tr_log, lines);
      }
    } else if (*rc_cmd) {
      auto model = se::DeltaVae::load(rc_model);
      auto source = load_shape(rc_source, rc_tax);
      auto delta = se::read_delta(rc_delta);
      auto posterior = model.encode(source, delta);
      auto decoded = model.decode(source, posterior.mean);
      se::write_delta(decoded.delta, rc_out);
      if (!rc_apply.empty())
        se::write_shape(se::apply_delta(source, decoded.delta), rc_apply);
    } else if (*gn_cmd) {
      auto model = se::DeltaVae::load(gn_model);
      auto source = load_shape(gn_source, gn_tax);
      auto decoded = model.generate(source, gn_count, gn_seed);
      fs::create_directories(gn_out);
      for (size_t i = 0; i < decoded.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "delta_%03zu.json", i);
        se::write_delta(decoded[i].delta, (fs::path(gn_out) / name).string());
      }
    } else if (*tf_cmd) {
      auto model = se::DeltaVae::load(tf_model);
      auto tax = se::read_taxonomy(tf_tax);
      auto source = se::read_shape(tf_source, tax);
      auto target_source = se::read_shape(tf_target_source, tax);
      auto delta = se::read_delta(tf_delta);
      auto decoded = model.transfer(source, delta, target_source);
      se::write_delta(decoded.delta, tf_out);
    } else if (*ip_cmd) {
      auto model = se::DeltaVae::load(ip_model);
      auto source = load_shape(ip_source, ip_tax);
      auto a = se::read_delta(ip_a);
      auto b = se::read_delta(ip_b);
      auto decoded = model.interpolate(source, a, b, ip_steps);
      fs::create_directories(ip_out);
      for (size_t i = 0; i < decoded.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "delta_%03zu.json", i);
        se::write_delta(decoded[i].delta, (fs::path(ip_out) / name).string());
      }
    } else if (*ev_cmd) {
      auto dataset = se::harness::load_dataset(ev_dataset);
      se::harness::ExperimentSpec spec;
      if (!ev_config.empty())
        spec = se::harness::experiment_spec_from_json(slurp(ev_config));
      if (!ev_experiment.empty())
        spec.kind = se::harness::experiment_from_name(ev_experiment);
      else if (ev_config.empty())
        throw std::runtime_error("eval needs --experiment or --config");
      if (ev_retrieval) spec.retrieval_baseline = true;
      if (ev_seed_set) spec.seed = ev_seed;
      std::unique_ptr<se::DeltaVae> model;
      if (!ev_model.empty())
        model = std::make_unique<se::DeltaVae>(se::DeltaVae::load(ev_model));
      auto report = se::harness::run_experiment(dataset, spec, model.get());
      se::harness::write_report(report, ev_out);
    } else if (*rp_cmd) {
      auto report = se::harness::report_from_json(slurp(rp_in));
      std::cout << se::harness::report_to_csv(report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
