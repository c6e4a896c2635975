#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <sstream>

#include "vidinr/cli.hpp"
#include "vidinr/config.hpp"
#include "vidinr/errors.hpp"
#include "vidinr/generator.hpp"
#include "vidinr/inference.hpp"
#include "vidinr/metrics.hpp"
#include "vidinr/training.hpp"

namespace py = pybind11;
using namespace vidinr;

namespace {

py::array_t<float> to_numpy(const torch::Tensor& t) {
    const auto c = t.detach().to(torch::kFloat32).contiguous();
    std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), c.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(c.numel()));
    return out;
}

struct PyGenerator {
    GeneratorNets nets{nullptr};

    // Clip [T, 3, H, W] in [-1, 1] for the latent drawn from `seed`.
    py::array_t<float> sample(std::uint64_t seed, std::int64_t height, std::int64_t width, std::int64_t frames,
                              double t_lo, double t_hi) {
        torch::NoGradGuard no_grad;
        Rng rng(seed);
        const auto z = sample_latents(rng, 1, nets->config());
        return to_numpy(time_resample(nets, z, height, width, frames, {t_lo, t_hi}).frames);
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "vidinr native bindings";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("parse", &Config::parse)
        .def_static("load", &Config::load)
        .def_static("keys", &Config::keys)
        .def("set", &Config::set)
        .def("validate", &Config::validate)
        .def("to_text", &Config::to_text)
        .def("digest", &Config::digest)
        .def_property_readonly("resolution", &Config::resolution)
        .def_property_readonly("frames", [](const Config& c) { return c.train.frames; });
    m.def("desk_config", &desk_config);

    py::class_<PyGenerator>(m, "Generator")
        .def(py::init([](const Config& cfg, std::uint64_t seed) {
                 torch::manual_seed(seed);
                 return PyGenerator{GeneratorNets(cfg.generator)};
             }),
             py::arg("config"), py::arg("seed") = 0)
        .def("sample", &PyGenerator::sample, py::arg("seed"), py::arg("height"), py::arg("width"),
             py::arg("frames"), py::arg("t_lo") = 0.0, py::arg("t_hi") = 1.0);
    m.def("load_generator", [](const std::string& path) { return PyGenerator{load_generator(path)}; });

    m.def("sample_time_pair", [](std::uint64_t seed) {
        Rng rng(seed);
        const auto p = sample_time_pair(rng);
        return py::make_tuple(p.t1, p.t2, p.delta_t);
    });

    m.def("frechet_distance",
          [](const Vector& mu1, const Matrix& cov1, const Vector& mu2, const Matrix& cov2) {
              return frechet_distance(mu1, cov1, mu2, cov2);
          });
    m.def("kernel_distance", [](const Matrix& real, const Matrix& fake) { return kernel_distance(real, fake); });
    m.def("inception_score", &inception_score);

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"vidinr"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    });
}
