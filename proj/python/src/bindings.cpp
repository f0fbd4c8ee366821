// Copyright 2026 The SemanticSTR Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "sstr/charset.hpp"
#include "sstr/cli.hpp"
#include "sstr/errors.hpp"
#include "sstr/eval.hpp"
#include "sstr/training.hpp"

namespace py = pybind11;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

sstr::geometry::Box to_box(const BoxTuple& t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)}; }
BoxTuple from_box(const sstr::geometry::Box& b) { return {b.x, b.y, b.w, b.h}; }

py::array_t<float> to_array(const sstr::GrayImage& img) {
  py::array_t<float> out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

sstr::GrayImage from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw sstr::DimensionError("image must be a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  sstr::GrayImage img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

class Model {
 public:
  explicit Model(const std::string& checkpoint)
      : ckpt_(sstr::load_checkpoint(checkpoint)), model_(sstr::model_from_checkpoint(ckpt_)) {}

  std::string recognize(const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
                        const std::vector<std::pair<std::string, double>>& tags) const {
    sstr::GrayImage img = from_array(image);
    if (img.width != sstr::kCropWidth || img.height != sstr::kCropHeight) {
      img = sstr::resize_keep_aspect(img, sstr::kCropWidth, sstr::kCropHeight);
    }
    std::vector<sstr::TagWeight> tw;
    for (const auto& [t, w] : tags) tw.push_back({t, w});
    py::gil_scoped_release release;
    return model_.greedy_decode(sstr::images_tensor({&img}), {tw}).text[0];
  }

  std::string placement() const { return sstr::to_string(model_.config().placement); }
  std::string config_json() const { return ckpt_.config.dump(); }
  std::size_t iteration() const { return ckpt_.meta.iter; }
  double val_acc() const { return ckpt_.meta.val_acc; }

 private:
  sstr::Checkpoint ckpt_;
  sstr::Recognizer model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scene text recognition with object-tag semantics";

  py::register_exception<sstr::Error>(m, "SstrError", PyExc_RuntimeError);
  // Registered after the generic one, so it is tried first.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sstr::IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const sstr::ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const sstr::InputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const sstr::FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = sstr::run_cli(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one sstr subcommand; returns (exit_code, stdout, stderr).");

  m.def("word_accuracy", &sstr::word_accuracy, py::arg("preds"), py::arg("gts"));
  m.def("word_match", &sstr::word_match, py::arg("pred"), py::arg("gt"));
  m.def(
      "compare_json",
      [](const std::string& baseline, const std::string& candidate) {
        return nlohmann::json(sstr::compare(sstr::load_eval_result(baseline), sstr::load_eval_result(candidate))).dump();
      },
      py::arg("baseline"), py::arg("candidate"));

  m.def("normalize", [](const std::string& s) { return sstr::charset::normalize(s); });
  m.def("encode", [](const std::string& s) { return sstr::charset::encode(s); });
  m.def("decode", [](const std::vector<int>& t) { return sstr::charset::decode(t); });
  m.attr("GO") = sstr::charset::kGo;
  m.attr("EOS") = sstr::charset::kEos;
  m.attr("PAD") = sstr::charset::kPad;
  m.attr("MAX_STEPS") = sstr::charset::kMaxSteps;

  m.def(
      "scale_box", [](const BoxTuple& b, double mask_area) { return from_box(sstr::geometry::scale_box({to_box(b), mask_area, "", true})); },
      py::arg("box"), py::arg("mask_area"));
  m.def(
      "encompasses", [](const BoxTuple& a, const BoxTuple& b) { return sstr::geometry::encompasses(to_box(a), to_box(b)); },
      py::arg("outer"), py::arg("inner"));
  m.def(
      "iou", [](const BoxTuple& a, const BoxTuple& b) { return sstr::geometry::iou(to_box(a), to_box(b)); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "read_image", [](const std::string& path) { return to_array(sstr::read_image(path)); }, py::arg("path"));
  m.def(
      "default_config_json", [] { return sstr::experiment_to_json(sstr::ExperimentConfig()).dump(); },
      "Experiment config with every field at its default.");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("recognize", &Model::recognize, py::arg("image"), py::arg("tags") = std::vector<std::pair<std::string, double>>{})
      .def_property_readonly("placement", &Model::placement)
      .def_property_readonly("config_json", &Model::config_json)
      .def_property_readonly("iteration", &Model::iteration)
      .def_property_readonly("val_acc", &Model::val_acc);
}
