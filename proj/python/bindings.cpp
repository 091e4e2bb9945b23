// Python surface: config handling, the experiment driver, and the cheap
// identity checks.  Heavy lifting stays in C++; Python gets the text-level
// interfaces (config in, summary/CSV out) plus a few scalar probes that are
// convenient from notebooks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flab/config.hpp"
#include "flab/experiment.hpp"
#include "flab/linear_wave.hpp"
#include "flab/null_forms.hpp"
#include "flab/vector_fields.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_flab, m) {
  m.doc() = "evolutionary Faddeev model laboratory";

  py::class_<flab::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_property(
          "kind",
          [](const flab::ExperimentConfig& c) {
            return std::string(flab::experiment_kind_name(c.kind));
          },
          [](flab::ExperimentConfig& c, const std::string& name) {
            c.kind = flab::experiment_kind_from(name);
          })
      .def_readwrite("dim", &flab::ExperimentConfig::dim)
      .def_readwrite("h", &flab::ExperimentConfig::h)
      .def_readwrite("L", &flab::ExperimentConfig::L)
      .def_readwrite("T_max", &flab::ExperimentConfig::T_max)
      .def_readwrite("cfl_margin", &flab::ExperimentConfig::cfl_margin)
      .def_readwrite("solve_margin", &flab::ExperimentConfig::solve_margin)
      .def_readwrite("epsilon", &flab::ExperimentConfig::epsilon)
      .def_readwrite("rows", &flab::ExperimentConfig::rows)
      .def_readwrite("checkpoint_every", &flab::ExperimentConfig::checkpoint_every)
      .def_readwrite("h_list", &flab::ExperimentConfig::h_list)
      .def_readwrite("eps_list", &flab::ExperimentConfig::eps_list)
      .def_readwrite("times", &flab::ExperimentConfig::times)
      .def_readwrite("seed", &flab::ExperimentConfig::seed)
      .def_readwrite("csv_name", &flab::ExperimentConfig::csv_name)
      .def_readwrite("summary_name", &flab::ExperimentConfig::summary_name)
      .def("__repr__", [](const flab::ExperimentConfig& c) {
        return "<ExperimentConfig " +
               std::string(flab::experiment_kind_name(c.kind)) + ">";
      });

  m.def("parse_config_text", &flab::parse_config_text, py::arg("text"),
        "Parse a config from file-format text (strict: unknown keys error).");
  m.def("load_config", &flab::load_config, py::arg("path"));
  m.def("config_echo", &flab::config_echo, py::arg("config"),
        "Effective config in file syntax; parsing it reproduces the config.");
  m.def("config_hash", &flab::config_hash, py::arg("config"), py::arg("tag") = "");

  m.def(
      "run_experiment",
      [](const flab::ExperimentConfig& cfg, const std::string& out_dir,
         const std::string& resume) {
        flab::ExperimentResult r;
        {
          py::gil_scoped_release unlock;
          r = flab::run_experiment(cfg, out_dir, resume);
        }
        return py::make_tuple(r.ok, r.summary, r.artifacts);
      },
      py::arg("config"), py::arg("out_dir"), py::arg("resume") = "",
      "Run one experiment; returns (ok, summary_text, artifact_paths).");

  m.def("diagnostics_csv_header", &flab::diagnostics_csv_header);

  m.def("null_identity_residual", &flab::null_identity_residual, py::arg("dim"),
        py::arg("seed"),
        "Worst relative residual of the two null-form decompositions over "
        "random jets: (Q, Q_mn).");
  m.def("wave_identity_residual", &flab::wave_identity_residual, py::arg("dim"),
        py::arg("seed"));
  m.def(
      "commutator_residuals",
      [](int dim, double h) {
        flab::CommutatorResiduals r;
        {
          py::gil_scoped_release unlock;
          r = flab::commutator_residuals(dim, h);
        }
        return py::make_tuple(r.rotation, r.boost, r.scaling);
      },
      py::arg("dim"), py::arg("h"),
      "Discrete commutator residuals (rotation, boost/translation ladder, "
      "scaling) at grid spacing h.");
  m.def("tail_reconstruction_residual", &flab::tail_reconstruction_residual,
        py::arg("m"), py::arg("sweep_points") = 81,
        "Worst error of the m-fold integral tail reconstruction on the "
        "degree-16 compactly supported test function.");
}
