#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "addl/base_codec.hpp"
#include "addl/container.hpp"
#include "addl/gabor.hpp"
#include "addl/image.hpp"
#include "addl/nets.hpp"
#include "addl/pipeline.hpp"
#include "addl/training.hpp"

namespace py = pybind11;

namespace {

addl::ImagePlane plane_from_array(const py::array_t<double, py::array::c_style>& arr) {
  if (arr.ndim() != 2) throw addl::ValueError("expected a 2-D float64 array");
  addl::ImagePlane img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  std::memcpy(img.samples.data(), arr.data(), img.samples.size() * sizeof(double));
  img.validate();
  return img;
}

py::array_t<double> plane_to_array(const addl::ImagePlane& img) {
  py::array_t<double> arr({img.height, img.width});
  std::memcpy(arr.mutable_data(), img.samples.data(), img.samples.size() * sizeof(double));
  return arr;
}

py::bytes vec_to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> bytes_to_vec(const py::bytes& b) {
  const std::string s = b;
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

// Weight checkpoint loaded once, reused across calls.
struct Codec {
  addl::ModelWeights weights;

  explicit Codec(const std::string& path) : weights(addl::ModelWeights::load(path)) {}

  py::bytes compress(const py::array_t<double, py::array::c_style>& img, int quality,
                     double side_budget, const std::string& mode) const {
    const addl::AddlStream s = addl::encode(plane_from_array(img), quality, weights, side_budget,
                                            addl::parse_mode(mode));
    return vec_to_bytes(addl::serialize_stream(s));
  }

  py::array_t<double> decompress(const py::bytes& data) const {
    return plane_to_array(addl::decode(addl::parse_stream(bytes_to_vec(data)), weights));
  }

  py::array_t<double> inspect_params(const py::array_t<double, py::array::c_style>& img) const {
    addl::NoGradGuard ng;
    const addl::Tensor maps = addl::gabor_net_forward(
        weights.gabor_net, addl::pad_to_even(plane_from_array(img)).to_tensor());
    py::array_t<double> arr({maps.dim(1), maps.dim(2), maps.dim(3)});
    std::memcpy(arr.mutable_data(), maps.data().data(), maps.size() * sizeof(double));
    return arr;
  }

  std::uint64_t model_id() const { return weights.digest(); }
};

}  // namespace

PYBIND11_MODULE(_addl, m) {
  m.doc() = "Dual-layer image codec with learned content-adaptive downsampling";

  py::register_exception<addl::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<addl::ModelMismatchError>(m, "ModelMismatchError", PyExc_ValueError);

  m.def("psnr",
        [](const py::array_t<double, py::array::c_style>& a,
           const py::array_t<double, py::array::c_style>& b) {
          return addl::psnr(plane_from_array(a), plane_from_array(b));
        },
        py::arg("a"), py::arg("b"), "PSNR in dB between two [0,1] images, capped at 99");

  m.def("encode_base",
        [](const py::array_t<double, py::array::c_style>& img, int quality) {
          return vec_to_bytes(addl::encode_base(plane_from_array(img), quality));
        },
        py::arg("image"), py::arg("quality"), "Compress one plane with the internal DCT codec");

  m.def("decode_base",
        [](const py::bytes& data) { return plane_to_array(addl::decode_base(bytes_to_vec(data))); },
        py::arg("data"));

  m.def("gabor_kernel",
        [](double wavelength, double orientation, double phase, double sigma, double aspect,
           int size) {
          const addl::gabor::Kernel k = addl::gabor::synth_kernel(
              {wavelength, orientation, phase, sigma, aspect}, size);
          py::array_t<double> arr({k.size, k.size});
          std::memcpy(arr.mutable_data(), k.taps.data(), k.taps.size() * sizeof(double));
          return arr;
        },
        py::arg("wavelength"), py::arg("orientation"), py::arg("phase"), py::arg("sigma"),
        py::arg("aspect"), py::arg("size") = 6,
        "Synthesize one DC-normalized downsampling kernel");

  m.def("bicubic_resize",
        [](const py::array_t<double, py::array::c_style>& img, double factor) {
          return plane_to_array(addl::bicubic_resize(plane_from_array(img), factor));
        },
        py::arg("image"), py::arg("factor"));

  m.def("init_weights",
        [](const std::string& path, std::uint64_t seed) {
          addl::ModelWeights::init(addl::ModelConfig{}, seed).save(path);
        },
        py::arg("path"), py::arg("seed") = 1,
        "Write a freshly initialized (untrained) weight checkpoint");

  m.def("train_stage",
        [](int stage, const std::string& out_path, const std::string& init_path,
           std::int64_t steps, std::uint64_t seed, int patch, int batch,
           const std::string& corpus_dir) {
          addl::TrainConfig cfg;
          cfg.stage = stage;
          cfg.steps = steps;
          cfg.seed = seed;
          cfg.patch = patch;
          cfg.batch = batch;
          cfg.corpus_dir = corpus_dir;
          addl::ModelWeights w = init_path.empty()
                                     ? addl::ModelWeights::init(addl::ModelConfig{}, seed)
                                     : addl::ModelWeights::load(init_path);
          switch (stage) {
            case 1: addl::stage1_train(w, cfg); break;
            case 2: addl::stage2_train(w, cfg); break;
            case 3: addl::stage3_train(w, cfg); break;
            default: throw addl::ValueError("stage must be 1, 2, or 3");
          }
          w.save(out_path);
        },
        py::arg("stage"), py::arg("out_path"), py::arg("init_path") = "",
        py::arg("steps") = 100, py::arg("seed") = 1, py::arg("patch") = 64, py::arg("batch") = 8,
        py::arg("corpus_dir") = "");

  py::class_<Codec>(m, "Codec")
      .def(py::init<const std::string&>(), py::arg("weights_path"))
      .def("compress", &Codec::compress, py::arg("image"), py::arg("quality") = 50,
           py::arg("side_budget") = 0.20, py::arg("mode") = "full",
           "Encode a [0,1] float64 image to a serialized dual-layer stream")
      .def("decompress", &Codec::decompress, py::arg("data"))
      .def("inspect_params", &Codec::inspect_params, py::arg("image"),
           "Per-pixel filter parameter planes, shape (5, H/2, W/2)")
      .def_property_readonly("model_id", &Codec::model_id);

  m.attr("__version__") = "0.1.0";
}
