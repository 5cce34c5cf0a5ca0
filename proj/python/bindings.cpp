#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ldc/canny.hpp"
#include "ldc/codec.hpp"
#include "ldc/dataset.hpp"
#include "ldc/experiment.hpp"
#include "ldc/metrics.hpp"
#include "ldc/objective.hpp"
#include "ldc/schedule.hpp"
#include "ldc/trainer.hpp"

namespace py = pybind11;
using namespace ldc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() == 2) {
        Tensor t(1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
        std::copy(a.data(), a.data() + t.size(), t.data.begin());
        return t;
    }
    if (a.ndim() == 3) {
        Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                 static_cast<int>(a.shape(2)));
        std::copy(a.data(), a.data() + t.size(), t.data.begin());
        return t;
    }
    throw std::invalid_argument("expected a (c,h,w) or (h,w) array");
}

py::array to_array(const Tensor& t) {
    py::array_t<double> a({t.c, t.h, t.w});
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

FilterKind parse_filter(const std::string& kind) { return filter_kind_from_string(kind); }

}  // namespace

PYBIND11_MODULE(_ldc, m) {
    m.doc() = "toy latent diffusion with localized structural control";

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("num_steps", &NoiseSchedule::num_steps)
        .def_property_readonly("betas", [](const NoiseSchedule& s) { return s.betas; })
        .def_property_readonly("alphas", [](const NoiseSchedule& s) { return s.alphas; })
        .def_property_readonly("alpha_bars", [](const NoiseSchedule& s) { return s.alpha_bars; })
        .def("snr", &NoiseSchedule::snr);

    m.def("build_schedule", &build_schedule, py::arg("num_steps"), py::arg("beta_start"),
          py::arg("beta_end"));
    m.def("forward_diffuse", [](const Array& z0, int t, const Array& eps, const NoiseSchedule& s) {
        return to_array(forward_diffuse(to_tensor(z0), t, to_tensor(eps), s));
    });
    m.def("predict_z0", [](const Array& z_t, const Array& eps_hat, int t, const NoiseSchedule& s) {
        return to_array(predict_z0(to_tensor(z_t), to_tensor(eps_hat), t, s));
    });

    m.def(
        "extract_edges",
        [](const Array& image, double low, double high) {
            return to_array(extract_edges(to_tensor(image), low, high));
        },
        py::arg("image"), py::arg("low_threshold") = 0.1, py::arg("high_threshold") = 0.2);

    m.def(
        "sample_roi_mask",
        [](uint64_t seed, int height, int width, double min_area_fraction, int max_rects) {
            Rng rng(seed);
            return to_array(sample_roi_mask(rng, height, width, min_area_fraction, max_rects).data);
        },
        py::arg("seed"), py::arg("height"), py::arg("width"), py::arg("min_area_fraction"),
        py::arg("max_rects") = 1);
    m.def("downsample_mask", [](const Array& mask, const std::vector<std::pair<int, int>>& dims) {
        RoiMask rm(to_tensor(mask));
        std::vector<py::array> out;
        for (const Tensor& level : downsample_mask(rm, dims)) out.push_back(to_array(level));
        return out;
    });

    m.def("loss_diff", [](const Array& eps, const Array& eps_hat) {
        return loss_diff(to_tensor(eps), to_tensor(eps_hat));
    });
    m.def("latent_filter", [](const Array& z, const std::string& kind) {
        return to_array(latent_filter(to_tensor(z), parse_filter(kind)));
    });
    m.def("loss_sim", [](const Array& z0, const Array& z0_hat, const Array& latent_mask,
                         const std::string& kind) {
        return loss_sim(to_tensor(z0), to_tensor(z0_hat), to_tensor(latent_mask),
                        parse_filter(kind));
    });
    m.def("loss_total", &loss_total, py::arg("l_diff"), py::arg("l_sim"), py::arg("lambda"));

    m.def("gaussian_downsample", [](const Array& edges) {
        return to_array(gaussian_downsample(to_tensor(edges)));
    });
    m.def("dmse_in", [](const Array& e_gt, const Array& e_gen, const Array& mask) {
        return dmse_in(to_tensor(e_gt), to_tensor(e_gen), RoiMask(to_tensor(mask)));
    });
    m.def("dmse_out", [](const Array& e_gen, const Array& mask) {
        return dmse_out(to_tensor(e_gen), RoiMask(to_tensor(mask)));
    });

    m.def("geometric_encode", [](const Array& image) {
        return to_array(GeometricCodec().encode(to_tensor(image)));
    });
    m.def("geometric_decode", [](const Array& latent) {
        return to_array(GeometricCodec().decode(to_tensor(latent)));
    });

    m.def(
        "make_sample",
        [](uint64_t seed, int index) {
            TrainConfig cfg;
            SyntheticSample s = make_sample(seed, index, cfg);
            py::dict d;
            d["image"] = to_array(s.image);
            d["edges"] = to_array(s.edges);
            d["mask"] = to_array(s.mask.data);
            d["class_id"] = s.class_id;
            d["caption_id"] = s.caption_id;
            return d;
        },
        py::arg("seed"), py::arg("index"));

    py::class_<ModelBundle>(m, "ModelBundle")
        .def_static("from_checkpoint", &ModelBundle::from_checkpoint)
        .def("encode",
             [](const ModelBundle& b, const Array& image) {
                 return to_array(b.codec->encode(to_tensor(image)));
             })
        .def("decode",
             [](const ModelBundle& b, const Array& latent) {
                 return to_array(b.codec->decode(to_tensor(latent)));
             })
        .def(
            "sample",
            [](const ModelBundle& b, uint64_t seed, std::optional<int> class_id) {
                return to_array(b.codec->decode(b.sample_latent(seed, class_id, nullptr)));
            },
            py::arg("seed"), py::arg("class_id") = std::nullopt);
}
