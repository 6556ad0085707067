// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <vector>

#include "camnoise/dataset.hpp"
#include "camnoise/estimator.hpp"
#include "camnoise/eval.hpp"
#include "camnoise/metadata.hpp"
#include "camnoise/noise_model.hpp"
#include "camnoise/realnoise.hpp"

namespace py = pybind11;
using namespace camnoise;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return Image(w, h, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Image& img) {
  FloatArray out({img.height(), img.width()});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(camnoise, m) {
  m.doc() = "Camera noise simulation and noise-source estimation";

  py::enum_<SensorType>(m, "SensorType").value("CCD", SensorType::CCD).value("CMOS", SensorType::CMOS);

  py::class_<CameraMetadata>(m, "CameraMetadata")
      .def(py::init<>())
      .def_readwrite("camera_gain", &CameraMetadata::camera_gain)
      .def_readwrite("exposure_time", &CameraMetadata::exposure_time)
      .def_readwrite("sensor_temperature", &CameraMetadata::sensor_temperature)
      .def_readwrite("dark_signal_fom", &CameraMetadata::dark_signal_fom)
      .def_readwrite("full_well_capacity", &CameraMetadata::full_well_capacity)
      .def_readwrite("pixel_clock_rate", &CameraMetadata::pixel_clock_rate)
      .def_readwrite("sense_node_gain", &CameraMetadata::sense_node_gain)
      .def_readwrite("sense_node_reset_factor", &CameraMetadata::sense_node_reset_factor)
      .def_readwrite("sensor_pixel_size", &CameraMetadata::sensor_pixel_size)
      .def_readwrite("sensor_type", &CameraMetadata::sensor_type)
      .def_readwrite("thermal_white_noise", &CameraMetadata::thermal_white_noise)
      .def("validate", &validate_ranges)
      .def(py::self == py::self);

  py::class_<NoiseLevels>(m, "NoiseLevels")
      .def_static("compose", &NoiseLevels::compose, py::arg("pn"), py::arg("dcsn"), py::arg("rn"), py::arg("xi") = 0.0)
      .def_readonly("sigma_pn", &NoiseLevels::sigma_pn)
      .def_readonly("sigma_dcsn", &NoiseLevels::sigma_dcsn)
      .def_readonly("sigma_rn", &NoiseLevels::sigma_rn)
      .def_readonly("xi", &NoiseLevels::xi)
      .def_readonly("sigma_total", &NoiseLevels::sigma_total)
      .def("__repr__", [](const NoiseLevels& l) {
        return py::str("NoiseLevels(pn={:.4g}, dcsn={:.4g}, rn={:.4g}, xi={:.4g}, total={:.4g})")
            .format(l.sigma_pn, l.sigma_dcsn, l.sigma_rn, l.xi, l.sigma_total);
      });

  m.def("max_metadata", &max_metadata, py::arg("sensor_type") = SensorType::CMOS);
  m.def("min_metadata", &min_metadata, py::arg("sensor_type") = SensorType::CCD);
  m.def("sample_metadata", &sample_metadata, py::arg("seed"));
  m.def("predict_sigmas", &predict_sigmas, py::arg("meta"), py::arg("mean_intensity"));
  m.def("clipped_std", &clipped_std, py::arg("mean"), py::arg("sigma"), py::arg("lo") = 0.0, py::arg("hi") = kMaxDn);
  m.def(
      "corrupt_patch",
      [](const FloatArray& clean, const CameraMetadata& meta, std::uint64_t seed) {
        const CorruptedPatch c = corrupt_patch(to_image(clean), meta, seed);
        return py::make_tuple(to_array(c.noisy), c.truth);
      },
      py::arg("clean"), py::arg("meta"), py::arg("seed"));
  m.def(
      "sensitivity_sweep",
      [](const std::string& param, int n, const CameraMetadata& fixed, double intensity) {
        std::vector<std::pair<double, double>> out;
        for (const auto& p : sensitivity_sweep(param, n, fixed, intensity)) out.emplace_back(p.value, p.observed_total);
        return out;
      },
      py::arg("param"), py::arg("n"), py::arg("fixed"), py::arg("mean_intensity") = kSensitivityIntensity);
  m.def("synthesize_clean_image",
        [](int w, int h, std::uint64_t seed) { return to_array(synthesize_clean_image(w, h, seed)); });

  py::class_<FittedGaussian>(m, "FittedGaussian")
      .def(py::init<double, double>(), py::arg("mu"), py::arg("sigma"))
      .def_readonly("mu", &FittedGaussian::mu)
      .def_readonly("sigma", &FittedGaussian::sigma);
  m.def("fix_noise_distribution", [](const FloatArray& a) { return fix_noise_distribution(to_image(a)); });
  m.def("rectify_dcsn", &rectify_dcsn, py::arg("dcsn"), py::arg("rn"));

  py::class_<Model>(m, "Model")
      .def_static(
          "build",
          [](const std::string& variant, double scale, int patch_size, std::uint64_t seed) {
            return Model::build({variant_from_string(variant), scale, patch_size}, seed);
          },
          py::arg("variant"), py::arg("scale") = 1.0, py::arg("patch_size") = 128, py::arg("seed") = 1)
      .def_static("load", &Model::load)
      .def("save", &Model::save)
      .def_property_readonly("variant", [](const Model& mo) { return std::string(to_string(mo.variant().kind)); })
      .def_property_readonly("patch_size", [](const Model& mo) { return mo.variant().patch_size; })
      .def_property_readonly("parameter_count", &Model::parameter_count);

  m.def(
      "estimate_image",
      [](const Model& model, const FloatArray& image, std::optional<CameraMetadata> meta, int threads) {
        const ImageEstimate e = estimate_image(model, to_image(image), meta, threads);
        std::vector<NoiseLevels> per_patch;
        for (const auto& p : e.patches) per_patch.push_back(p.levels);
        return py::make_tuple(e.mean, per_patch);
      },
      py::arg("model"), py::arg("image"), py::arg("meta") = std::nullopt, py::arg("threads") = 1);

  m.def(
      "source_metrics",
      [](const std::vector<double>& est, const std::vector<double>& truth) {
        const SourceMetrics s = compute_source_metrics(est, truth);
        py::dict d;
        d["bias"] = s.bias;
        d["std"] = s.std;
        d["rms"] = s.rms;
        return d;
      },
      py::arg("estimates"), py::arg("truths"));
  m.def("added_noise_xi", &added_noise_xi, py::arg("sigma_model"), py::arg("sigma_n"));
  m.def("baseline_block_estimate", [](const FloatArray& a) { return baseline_block_estimate(to_image(a)); });
}
