// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <sstream>

#include "semlink/baselines/baselines.hpp"
#include "semlink/channel/channel.hpp"
#include "semlink/cli/cli.hpp"
#include "semlink/error.hpp"
#include "semlink/semnet/dataset.hpp"
#include "semlink/semnet/semnet.hpp"
#include "semlink/trainer/trainer.hpp"

namespace py = pybind11;
using namespace semlink;

namespace {

py::array to_numpy(const num::Tensor& t) {
  const auto& s = t.shape();
  std::vector<py::ssize_t> shape(s.begin(), s.end());
  if (t.is_complex()) {
    const auto v = t.to_complex_vector();
    py::array_t<std::complex<double>> a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
  }
  const auto v = t.to_vector();
  py::array_t<double> a(shape);
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

sem::Split split_from(const std::string& s) {
  if (s == "train") return sem::Split::train;
  if (s == "val") return sem::Split::val;
  if (s == "test") return sem::Split::test;
  throw UsageError("unknown split '" + s + "' (train | val | test)");
}

}  // namespace

PYBIND11_MODULE(_semlink, m) {
  m.doc() = "Bindings for the semlink simulator and trainer.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_json", &ExperimentConfig::from_json)
      .def_static("load", &ExperimentConfig::load)
      .def("to_json", &ExperimentConfig::to_json)
      .def("save", &ExperimentConfig::save)
      .def("validate", &ExperimentConfig::validate)
      .def("hash", &ExperimentConfig::hash)
      .def("noise_var", &ExperimentConfig::noise_var)
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; });

  m.def(
      "realize_channel",
      [](const ExperimentConfig& cfg, std::uint64_t seed) {
        num::Rng rng(seed);
        return to_numpy(channel::realize(cfg, rng).H);
      },
      py::arg("config"), py::arg("seed"), "Channel tensor [K, L+Q, N_c, N_r, N_t] for one seed.");

  m.def(
      "sample",
      [](const ExperimentConfig& cfg, std::uint64_t seed, std::size_t index) {
        const auto s = sem::dataset_sample(cfg, num::Rng(seed), index);
        py::array_t<std::int32_t> label({static_cast<py::ssize_t>(cfg.dims.H), static_cast<py::ssize_t>(cfg.dims.W)});
        std::copy(s.label.begin(), s.label.end(), label.mutable_data());
        return py::make_tuple(to_numpy(s.mod_a), to_numpy(s.mod_b), label);
      },
      py::arg("config"), py::arg("seed"), py::arg("index"), "(modality A, modality B, label) of one dataset sample.");

  m.def(
      "svd_bound",
      [](const ExperimentConfig& cfg, std::uint64_t seed) {
        num::Rng rng(seed);
        const auto ch = channel::realize(cfg, rng);
        return base::svd_bound(ch, cfg.dims, cfg.physics.P_t, cfg.noise_var());
      },
      py::arg("config"), py::arg("seed"));

  m.def(
      "evaluate",
      [](const ExperimentConfig& cfg, const std::string& variant, const std::string& ckpt, const std::string& split,
         std::size_t max_samples) {
        train::System sys(cfg, train::variant_from_string(variant));
        int stage = 0;
        if (!ckpt.empty()) {
          stage = train::read_checkpoint_info(ckpt).stage;
          train::load_checkpoint(ckpt, train::stage_params(sys, stage), train::stage_hash(cfg, stage),
                                stage == 2 ? "" : variant);
        }
        // a semantic-only checkpoint is scored on the identity path
        const auto path = stage == 1 ? train::Path::identity : train::Path::link;
        train::EvalResult r;
        {
          py::gil_scoped_release release;
          r = train::evaluate(sys, split_from(split), path, max_samples);
        }
        py::dict d;
        d["miou"] = r.miou;
        d["pixel_accuracy"] = r.pixel_accuracy;
        d["eta"] = r.eta;
        d["class_iou"] = r.class_iou;
        d["samples"] = r.samples;
        return d;
      },
      py::arg("config"), py::arg("variant") = "superposed", py::arg("ckpt") = "", py::arg("split") = "val",
      py::arg("max_samples") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"semlink"};
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(full, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
