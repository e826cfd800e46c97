#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "structedit/delta.hpp"
#include "structedit/harness.hpp"
#include "structedit/metrics.hpp"
#include "structedit/shape_io.hpp"
#include "structedit/synthgen.hpp"
#include "structedit/vae.hpp"

namespace py = pybind11;
using namespace structedit;

namespace {

struct PyTaxonomy {
  std::shared_ptr<const Taxonomy> tax;
};

struct PyShape {
  ShapeTree tree;
};

struct PyDelta {
  ShapeDelta delta;
};

struct PyModel {
  DeltaVae model;
};

PyDelta decoded(DecodedDelta&& d) { return PyDelta{std::move(d.delta)}; }

}  // namespace

PYBIND11_MODULE(_structedit, m) {
  m.doc() = "Hierarchical shape edit toolkit";

  py::class_<PyTaxonomy>(m, "Taxonomy")
      .def_static("load", [](const std::string& path) {
        return PyTaxonomy{read_taxonomy(path)};
      })
      .def_static("synthetic", [] { return PyTaxonomy{synth::synthetic_taxonomy()}; })
      .def("save", [](const PyTaxonomy& t, const std::string& path) {
        write_taxonomy(*t.tax, path);
      })
      .def_property_readonly("labels", [](const PyTaxonomy& t) { return t.tax->labels; })
      .def("allows", [](const PyTaxonomy& t, const std::string& parent,
                        const std::string& child) { return t.tax->allows(parent, child); });

  py::class_<PyShape>(m, "Shape")
      .def_static("load", [](const std::string& path, const PyTaxonomy& tax) {
        return PyShape{read_shape(path, tax.tax)};
      })
      .def_static("from_json", [](const std::string& text, const PyTaxonomy& tax) {
        return PyShape{shape_from_json(text, tax.tax)};
      })
      .def("save", [](const PyShape& s, const std::string& path) {
        write_shape(s.tree, path);
      })
      .def("to_json", [](const PyShape& s) { return shape_to_json(s.tree); })
      .def("validate", [](const PyShape& s) { validate_shape(s.tree); })
      .def("hash", [](const PyShape& s) { return shape_hash(s.tree); })
      .def_property_readonly("category",
                             [](const PyShape& s) { return s.tree.category; })
      .def_property_readonly("part_count",
                             [](const PyShape& s) { return count_parts(s.tree.root); });

  py::class_<PyDelta>(m, "Delta")
      .def_static("load", [](const std::string& path) {
        return PyDelta{read_delta(path)};
      })
      .def_static("from_json", [](const std::string& text) {
        return PyDelta{delta_from_json(text)};
      })
      .def("save", [](const PyDelta& d, const std::string& path) {
        write_delta(d.delta, path);
      })
      .def("to_json", [](const PyDelta& d) { return delta_to_json(d.delta); })
      .def_property_readonly("action_count",
                             [](const PyDelta& d) { return d.delta.actions.size(); })
      .def_property_readonly("addition_count",
                             [](const PyDelta& d) { return d.delta.additions.size(); });

  m.def("compute_delta", [](const PyShape& a, const PyShape& b) {
    return PyDelta{compute_delta(a.tree, b.tree)};
  });
  m.def("apply_delta", [](const PyShape& s, const PyDelta& d) {
    return PyShape{apply_delta(s.tree, d.delta)};
  });
  m.def("identity_delta", [](const PyShape& s) {
    return PyDelta{identity_delta(s.tree)};
  });

  m.def("match_shapes", [](const PyShape& a, const PyShape& b) {
    PartMatching matching = match_shapes(a.tree, b.tree);
    py::dict out;
    out["pairs"] = matching.pairs;
    out["unmatched_source"] = matching.unmatched_source;
    out["unmatched_target"] = matching.unmatched_target;
    out["total_cost"] = matching.total_cost;
    return out;
  });

  m.def("geometric_distance",
        [](const PyShape& a, const PyShape& b, std::uint64_t seed) {
          return geometric_distance(a.tree, b.tree, seed);
        },
        py::arg("a"), py::arg("b"), py::arg("seed") = 0);
  m.def("structural_distance", [](const PyShape& a, const PyShape& b) {
    return structural_distance(a.tree, b.tree);
  });
  m.def("shape_distance",
        [](const std::string& metric, const PyShape& a, const PyShape& b,
           std::uint64_t seed) {
          return shape_distance(metric_from_name(metric), a.tree, b.tree, seed);
        },
        py::arg("metric"), py::arg("a"), py::arg("b"), py::arg("seed") = 0);

  m.def("build_neighborhoods",
        [](const std::vector<PyShape*>& shapes, int k, const std::string& metric,
           std::uint64_t seed) {
          std::vector<const ShapeTree*> ptrs;
          for (PyShape* s : shapes) ptrs.push_back(&s->tree);
          return neighborhood_table_to_json(
              build_neighborhoods(ptrs, k, metric_from_name(metric), seed));
        },
        py::arg("shapes"), py::arg("k"), py::arg("metric") = "geometric",
        py::arg("seed") = 0);

  m.def("generate_dataset",
        [](int groups_per_subtype, std::uint64_t seed, const std::string& out_dir) {
          synth::DatasetConfig cfg;
          cfg.groups_per_subtype = groups_per_subtype;
          cfg.seed = seed;
          harness::save_dataset(harness::make_dataset(cfg), out_dir);
        },
        py::arg("groups_per_subtype"), py::arg("seed"), py::arg("out_dir"));

  m.def("build_pairs",
        [](const std::string& dataset_dir, const std::string& split, int per_source,
           std::uint64_t seed, const std::string& out_path) {
          auto dataset = harness::load_dataset(dataset_dir);
          auto pairs = harness::build_within_group_pairs(dataset, split, per_source, seed);
          harness::write_pair_set(pairs, out_path);
          return pairs.records.size();
        },
        py::arg("dataset_dir"), py::arg("split"), py::arg("per_source"),
        py::arg("seed"), py::arg("out_path"));

  m.def("train_model",
        [](const std::string& dataset_dir, const std::string& train_spec_json,
           const std::string& model_out) {
          auto dataset = harness::load_dataset(dataset_dir);
          auto spec = harness::train_spec_from_json(train_spec_json);
          auto pairs = harness::build_within_group_pairs(dataset, spec.split,
                                                         spec.per_source,
                                                         spec.train.seed);
          DeltaVae model(spec.model);
          auto log = model.train(harness::as_train_pairs(dataset, pairs), spec.train);
          model.save(model_out);
          return log.empty() ? 0.0 : log.back().loss.total;
        },
        py::arg("dataset_dir"), py::arg("train_spec_json"), py::arg("model_out"));

  m.def("run_experiment",
        [](const std::string& dataset_dir, const std::string& spec_json,
           const std::string& model_path, const std::string& out_dir) {
          auto dataset = harness::load_dataset(dataset_dir);
          auto spec = harness::experiment_spec_from_json(spec_json);
          std::unique_ptr<DeltaVae> model;
          if (!model_path.empty())
            model = std::make_unique<DeltaVae>(DeltaVae::load(model_path));
          auto report = harness::run_experiment(dataset, spec, model.get());
          if (!out_dir.empty()) harness::write_report(report, out_dir);
          return harness::report_to_json(report);
        },
        py::arg("dataset_dir"), py::arg("spec_json"), py::arg("model_path") = "",
        py::arg("out_dir") = "");

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::string& config_json) {
             return PyModel{DeltaVae(config_json.empty()
                                         ? VaeConfig{}
                                         : vae_config_from_json(config_json))};
           }),
           py::arg("config_json") = "")
      .def_static("load", [](const std::string& path) {
        return PyModel{DeltaVae::load(path)};
      })
      .def("save", [](const PyModel& m_, const std::string& path) {
        m_.model.save(path);
      })
      .def_property_readonly("config_json", [](const PyModel& m_) {
        return vae_config_to_json(m_.model.config());
      })
      .def("encode",
           [](const PyModel& m_, const PyShape& s, const PyDelta& d) {
             LatentPosterior p = m_.model.encode(s.tree, d.delta);
             return py::make_tuple(p.mean, p.log_variance);
           })
      .def("decode",
           [](const PyModel& m_, const PyShape& s, const std::vector<double>& z) {
             return decoded(m_.model.decode(s.tree, z));
           })
      .def("loss",
           [](const PyModel& m_, const PyShape& s, const PyDelta& d) {
             LossBreakdown l = m_.model.loss(s.tree, d.delta);
             py::dict out;
             out["box_delta"] = l.box_delta;
             out["added"] = l.added;
             out["type"] = l.type;
             out["kl"] = l.kl;
             out["total"] = l.total;
             return out;
           })
      .def("reconstruct",
           [](const PyModel& m_, const PyShape& s, const PyDelta& d) {
             LatentPosterior p = m_.model.encode(s.tree, d.delta);
             return decoded(m_.model.decode(s.tree, p.mean));
           })
      .def("transfer",
           [](const PyModel& m_, const PyShape& src, const PyDelta& d,
              const PyShape& tgt) {
             return decoded(m_.model.transfer(src.tree, d.delta, tgt.tree));
           })
      .def("generate",
           [](const PyModel& m_, const PyShape& s, int count, std::uint64_t seed) {
             std::vector<PyDelta> out;
             for (auto& d : m_.model.generate(s.tree, count, seed))
               out.push_back(decoded(std::move(d)));
             return out;
           },
           py::arg("source"), py::arg("count"), py::arg("seed") = 0)
      .def("interpolate",
           [](const PyModel& m_, const PyShape& s, const PyDelta& a, const PyDelta& b,
              int steps) {
             std::vector<PyDelta> out;
             for (auto& d : m_.model.interpolate(s.tree, a.delta, b.delta, steps))
               out.push_back(decoded(std::move(d)));
             return out;
           });
}
