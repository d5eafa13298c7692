// SPDX-License-Identifier: Apache-2.0
//
// Python bindings over the main operations: toy data, training, synthesis,
// evaluation, checkpoints, and the U/S/H protocol helpers.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <json.hpp>

#include "bmcogan/config.hpp"
#include "bmcogan/dataset.hpp"
#include "bmcogan/eval.hpp"
#include "bmcogan/training.hpp"
#include "bmcogan/version.hpp"

namespace py = pybind11;
using namespace bmcogan;

namespace {

Mat mat_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ShapeError("expected a 2-D array");
    Mat m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + m.size(), m.d.begin());
    return m;
}

py::array_t<double> numpy_from_mat(const Mat& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.d.begin(), m.d.end(), out.mutable_data());
    return out;
}

TrainConfig train_config_from_str(const std::string& config_json) {
    return train_config_from_json(nlohmann::json::parse(config_json));
}

py::dict report_to_dict(const EvalReport& rep) {
    py::dict d;
    d["U"] = rep.U;
    d["S"] = rep.S;
    d["H"] = rep.H;
    d["classifier"] = rep.classifier;
    d["n_per_class"] = rep.n_per_class;
    d["use_D_transform"] = rep.used_D_transform;
    py::dict per;
    for (const auto& [c, a] : rep.per_class_acc) per[py::int_(c)] = a;
    d["per_class_acc"] = per;
    return d;
}

// Trained model plus enough state to evaluate, synthesize, and save.
struct Trained {
    TrainState state;
    TrainConfig config;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "BMCoGAN core: coupled bidirectional-mapping GAN for generalized zero-shot learning";
    m.attr("__version__") = kVersionString;

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<VersionError>(m, "VersionError", PyExc_IOError);

    py::class_<GZSLDataset>(m, "Dataset")
        .def_property_readonly("name", [](const GZSLDataset& d) { return d.meta.name; })
        .def_property_readonly("dx", [](const GZSLDataset& d) { return d.meta.dx; })
        .def_property_readonly("a_dim", [](const GZSLDataset& d) { return d.meta.a_dim; })
        .def_property_readonly("c_seen", [](const GZSLDataset& d) { return d.meta.c_seen; })
        .def_property_readonly("c_unseen", [](const GZSLDataset& d) { return d.meta.c_unseen; })
        .def_property_readonly("train_features",
                               [](const GZSLDataset& d) { return numpy_from_mat(d.train_features); })
        .def_property_readonly("train_labels",
                               [](const GZSLDataset& d) { return d.train_labels; })
        .def_property_readonly("test_seen_labels",
                               [](const GZSLDataset& d) { return d.test_seen_labels; })
        .def_property_readonly("test_unseen_labels",
                               [](const GZSLDataset& d) { return d.test_unseen_labels; })
        .def_property_readonly("attributes",
                               [](const GZSLDataset& d) { return numpy_from_mat(d.semantics.attributes); })
        .def("content_hash", &dataset_content_hash)
        .def("save", [](const GZSLDataset& d, const std::string& path) { save_dataset(d, path); });

    m.def("make_toy_dataset",
          [](uint64_t seed, int c_seen, int c_unseen, int dx, int a_dim, int n_per_class) {
              return make_toy_dataset(seed, c_seen, c_unseen, dx, a_dim, n_per_class);
          },
          py::arg("seed"), py::arg("c_seen") = 8, py::arg("c_unseen") = 4, py::arg("dx") = 16,
          py::arg("a_dim") = 8, py::arg("n_per_class") = 50);
    m.def("load_dataset", [](const std::string& path) { return load_dataset(path); });

    py::class_<Trained>(m, "Trained")
        .def_property_readonly("step", [](const Trained& t) { return t.state.step; })
        .def("loss_history",
             [](const Trained& t) {
                 py::array_t<double> out({static_cast<int>(t.state.history.size()), 9});
                 auto* p = out.mutable_data();
                 for (const auto& r : t.state.history) {
                     *p++ = r.l_g1;
                     *p++ = r.l_reg_s;
                     *p++ = r.l_reg_u;
                     *p++ = r.l_g2;
                     *p++ = r.l_cls;
                     *p++ = r.l_d;
                     *p++ = r.l_cen;
                     *p++ = r.group1;
                     *p++ = r.group2;
                 }
                 return out;
             })
        .def("synthesize",
             [](const Trained& t, const GZSLDataset& ds, int n_per_class, uint64_t seed) {
                 SynthesisConfig sc;
                 sc.n_per_class = n_per_class;
                 sc.seed = seed;
                 const auto syn = synthesize_unseen(t.state.model, ds.semantics, sc);
                 return py::make_tuple(numpy_from_mat(syn.features), syn.labels);
             },
             py::arg("dataset"), py::arg("n_per_class") = 400, py::arg("seed") = 0)
        .def("evaluate",
             [](const Trained& t, const GZSLDataset& ds, int n_per_class,
                const std::string& classifier, uint64_t seed, bool use_D_transform) {
                 SynthesisConfig sc;
                 sc.n_per_class = n_per_class;
                 sc.seed = seed;
                 sc.use_D_transform = use_D_transform;
                 FinalClassifierConfig clf;
                 clf.kind = parse_classifier_kind(classifier);
                 return report_to_dict(evaluate_gzsl(t.state.model, ds, sc, clf));
             },
             py::arg("dataset"), py::arg("n_per_class") = 400,
             py::arg("classifier") = "softmax", py::arg("seed") = 0,
             py::arg("use_D_transform") = true)
        .def("save", [](const Trained& t, const std::string& path) {
            save_checkpoint(t.state, t.config, path);
        });

    m.def("train",
          [](const GZSLDataset& ds, const std::string& config_json) {
              const TrainConfig cfg = train_config_from_str(config_json);
              Trained t{train(ds, cfg), cfg};
              return t;
          },
          py::arg("dataset"), py::arg("config_json") = "{}");
    m.def("load_checkpoint", [](const std::string& path) {
        auto loaded = load_checkpoint(path);
        return Trained{std::move(loaded.state), loaded.config};
    });

    m.def("harmonic_mean", &harmonic_mean, py::arg("u"), py::arg("s"));
    m.def("per_class_top1", &per_class_top1, py::arg("predictions"), py::arg("labels"),
          py::arg("class_set"));
    m.def("transform_through_d",
          [](const Trained& t, const GZSLDataset& ds,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
             const std::vector<int>& labels, bool use_D_transform) {
              return numpy_from_mat(transform_through_D(t.state.model, mat_from_numpy(features),
                                                        labels, ds.semantics, use_D_transform));
          },
          py::arg("trained"), py::arg("dataset"), py::arg("features"), py::arg("labels"),
          py::arg("use_D_transform") = true);
}
