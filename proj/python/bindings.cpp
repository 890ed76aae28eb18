#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "azarnet/audio.hpp"
#include "azarnet/dataset.hpp"
#include "azarnet/dsp.hpp"
#include "azarnet/errors.hpp"
#include "azarnet/gradcheck.hpp"
#include "azarnet/metrics.hpp"
#include "azarnet/model.hpp"
#include "azarnet/training.hpp"

namespace py = pybind11;
using namespace azarnet;

namespace {

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::array_t<float> samples_to_numpy(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AzarNet Dastgah classification core";

  py::register_exception<Error>(m, "AzarnetError", PyExc_RuntimeError);

  m.attr("CLASS_NAMES") = std::vector<std::string>(kClassNames.begin(), kClassNames.end());
  m.attr("SAMPLE_RATE") = kSampleRate;
  m.attr("CLIP_SAMPLES") = kClipSamples;

  m.def("load_wav", [](const std::string& path) {
    const AudioClip clip = load_wav(path);
    return py::make_tuple(samples_to_numpy(clip.samples), clip.sample_rate);
  });
  m.def(
      "write_wav",
      [](const std::string& path, std::vector<float> samples, int rate) {
        write_wav(path, AudioClip{std::move(samples), rate});
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kSampleRate);
  m.def("synth_clip", [](int class_id, std::uint64_t seed) {
    SynthSpec spec;
    spec.class_id = class_id;
    spec.seed = seed;
    const AudioClip clip = synth_clip(spec);
    return samples_to_numpy(clip.samples);
  });
  m.def("generate_dataset", &generate_dataset, py::arg("n_per_class"), py::arg("seed"), py::arg("out_dir"));

  m.def(
      "spectrogram",
      [](std::vector<float> samples, int rate) {
        return to_numpy(preprocess_clip(AudioClip{std::move(samples), rate}).values);
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate);
  m.def("preprocess", [](const std::string& path) { return to_numpy(preprocess(path).values); });
  m.def("stft_magnitude", [](std::vector<float> samples) {
    return to_numpy(stft_magnitude(AudioClip{std::move(samples), kSampleRate}));
  });

  py::class_<Model>(m, "Model")
      .def(py::init([](std::uint64_t seed) {
             ModelConfig cfg;
             cfg.seed = seed;
             return Model(cfg);
           }),
           py::arg("seed") = 0)
      .def_static("load", &load_checkpoint)
      .def("save", [](Model& self, const std::string& path) { save_checkpoint(self, path); })
      .def("total_params", &Model::total_params)
      .def("summary", [](const Model& self) { return format_summary(self.summary()); })
      .def("layer_params",
           [](const Model& self) {
             std::vector<std::size_t> out;
             for (const auto& row : self.summary()) out.push_back(row.params);
             return out;
           })
      .def("predict", [](Model& self, const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
        Tensor batch = from_numpy(x);
        if (batch.rank() == 2) batch = batch.reshaped({1, batch.dim(0), batch.dim(1)});
        return to_numpy(self.predict(batch));
      });

  m.def(
      "train",
      [](Model& model, const std::vector<py::array_t<float>>& xs, const std::vector<int>& ys, int epochs,
         std::uint64_t seed, double target) {
        LabeledSet set;
        for (std::size_t i = 0; i < xs.size(); ++i) set.add(from_numpy(xs[i]), ys.at(i));
        TrainConfig cfg;
        cfg.max_epochs = epochs;
        cfg.seed = seed;
        cfg.target_train_accuracy = target;
        py::gil_scoped_release release;
        return train(model, set, LabeledSet{}, cfg).to_csv();
      },
      py::arg("model"), py::arg("inputs"), py::arg("labels"), py::arg("epochs") = 1, py::arg("seed") = 0,
      py::arg("target_train_accuracy") = 0.0);

  m.def(
      "class_report",
      [](const std::vector<int>& predictions, const std::vector<int>& labels) {
        const ClassReport r = class_report(confusion_matrix(predictions, labels));
        py::dict out;
        py::list rows;
        for (std::size_t i = 0; i < r.per_class.size(); ++i) {
          rows.append(py::make_tuple(r.class_names[i], r.per_class[i].precision, r.per_class[i].recall,
                                     r.per_class[i].f1));
        }
        out["classes"] = rows;
        out["macro_f1"] = r.macro_f1;
        out["text"] = report_to_text(r);
        return out;
      },
      py::arg("predictions"), py::arg("labels"));
  m.def("f1_score", &f1_score);

  m.def(
      "gradcheck",
      [](std::uint64_t seed) {
        py::dict out;
        for (const auto& r : run_layer_gradchecks(seed)) out[py::str(r.check)] = r.max_rel_error;
        out["model"] = run_model_gradcheck(seed).max_rel_error;
        return out;
      },
      py::arg("seed") = 0);
}
