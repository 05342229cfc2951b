// Python bindings: checkpoints and prediction, manufactured waves, LHS,
// NRMSE, and the train/verify commands.

#include "elastodyn/cli.hpp"
#include "elastodyn/data.hpp"
#include "elastodyn/sampling.hpp"
#include "elastodyn/training.hpp"
#include "elastodyn/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace elastodyn;

namespace {

std::vector<std::string> field_names(Dim dim) {
  std::vector<std::string> out;
  for (Field f : output_fields(dim)) out.emplace_back(field_name(f));
  return out;
}

data::PlaneWaveSpec make_wave(const std::string& kind, double amplitude, double wavenumber, int axis,
                              int polarization, int sense, double phase, double lam, double mu, double rho) {
  data::PlaneWaveSpec w;
  if (kind == "P") {
    w.kind = data::WaveKind::P;
  } else if (kind == "S") {
    w.kind = data::WaveKind::S;
  } else {
    throw std::invalid_argument("wave kind must be 'P' or 'S', got '" + kind + "'");
  }
  w.amplitude = amplitude;
  w.wavenumber = wavenumber;
  w.axis = axis;
  w.polarization = polarization;
  w.sense = sense;
  w.phase = phase;
  w.material = {lam, mu, rho};
  w.validate();
  return w;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Physics-informed networks for dynamic linear elasticity";

  py::class_<data::PlaneWaveSpec>(m, "PlaneWave")
      .def(py::init(&make_wave), py::arg("kind"), py::arg("amplitude"), py::arg("wavenumber"),
           py::arg("axis"), py::arg("polarization"), py::arg("sense") = 1, py::arg("phase") = 0.0,
           py::arg("lam"), py::arg("mu"), py::arg("rho"))
      .def_property_readonly("speed", &data::PlaneWaveSpec::wave_speed);

  m.def(
      "wave_fields",
      [](const std::vector<data::PlaneWaveSpec>& waves, const Eigen::MatrixXd& points) {
        if (points.cols() != 4) throw std::invalid_argument("points must have columns x, y, z, t");
        Eigen::MatrixXd out(points.rows(), 9);
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
          const auto f = data::wave_fields<double>(waves, points(i, 0), points(i, 1), points(i, 2), points(i, 3));
          for (int j = 0; j < 9; ++j) out(i, j) = f[static_cast<std::size_t>(j)];
        }
        return out;
      },
      py::arg("waves"), py::arg("points"),
      "Exact fields (u_x, u_y, u_z, s_xx, s_yy, s_zz, s_xy, s_yz, s_xz) at rows (x, y, z, t).");

  m.def(
      "nrmse",
      [](const std::vector<double>& pred, const std::vector<double>& ref) { return data::nrmse(pred, ref); },
      py::arg("pred"), py::arg("ref"));

  m.def(
      "lhs",
      [](std::size_t n, const sampling::Bounds& bounds, std::uint64_t seed) {
        return sampling::lhs(n, bounds, seed).points;
      },
      py::arg("n"), py::arg("bounds"), py::arg("seed"));

  py::class_<training::Checkpoint>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& p) { return training::read_checkpoint(p); }, py::arg("path"))
      .def_property_readonly("mode", [](const training::Checkpoint& c) { return std::string(training::mode_name(c.mode)); })
      .def_property_readonly("schema", [](const training::Checkpoint& c) { return c.schema.name(); })
      .def_property_readonly("epoch", [](const training::Checkpoint& c) { return c.epoch; })
      .def_property_readonly("columns", [](const training::Checkpoint& c) { return c.schema.coord_names(); })
      .def_property_readonly("fields", [](const training::Checkpoint& c) { return field_names(c.schema.dim); })
      .def_property_readonly("material",
                             [](const training::Checkpoint& c) -> std::optional<std::pair<double, double>> {
                               if (!c.pack.extra) return std::nullopt;
                               const auto m = training::recovered_material(c.pack, c.scales, c.material.rho);
                               return std::make_pair(m.lambda, m.mu);
                             })
      .def(
          "predict",
          [](const training::Checkpoint& c, const Eigen::MatrixXd& coords, int threads) {
            if (coords.cols() != c.schema.coord_count()) {
              throw std::invalid_argument("expected " + std::to_string(c.schema.coord_count()) +
                                          " coordinate columns for schema " + c.schema.name());
            }
            py::gil_scoped_release release;
            return training::predict(c.pack, coords, c.schema, c.scales, threads);
          },
          py::arg("coords"), py::arg("threads") = 1);

  m.def(
      "train",
      [](const std::filesystem::path& config) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::cmd_train(config, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("config"), "Runs a training config; returns (exit_code, stdout, stderr).");

  m.def("verify_quick", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& r : verify::quick()) out.emplace_back(r.name, r.passed, r.detail);
    return out;
  });
}
