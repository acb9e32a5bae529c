#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "awdiff/diffusion.hpp"
#include "awdiff/metrics.hpp"
#include "awdiff/phantom.hpp"
#include "awdiff/training.hpp"

namespace py = pybind11;
using namespace awdiff;

namespace {

using Array2D = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array2D& arr) {
    auto buf = arr.request();
    if (buf.ndim != 2) throw ParameterError("expected a 2D array");
    const int h = static_cast<int>(buf.shape[0]);
    const int w = static_cast<int>(buf.shape[1]);
    const double* p = static_cast<const double*>(buf.ptr);
    return Image(w, h, std::vector<double>(p, p + static_cast<std::size_t>(h) * w));
}

py::array_t<double> from_image(const Image& img) {
    py::array_t<double> arr({img.height(), img.width()});
    std::memcpy(arr.mutable_data(), img.data(), img.size() * sizeof(double));
    return arr;
}

py::array_t<double> stack_images(const std::vector<Image>& images) {
    const int n = static_cast<int>(images.size());
    const int h = images[0].height(), w = images[0].width();
    py::array_t<double> arr({n, h, w});
    for (int i = 0; i < n; ++i)
        std::memcpy(arr.mutable_data() + static_cast<std::size_t>(i) * h * w, images[i].data(),
                    images[i].size() * sizeof(double));
    return arr;
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    return linear_beta_schedule(steps, beta_start, beta_end);
}

} // namespace

PYBIND11_MODULE(_awdiff, m) {
    m.doc() = "A trous wavelet diffusion pipeline: starlet transforms, DDPM math, "
              "phantom synthesis and wavelet-domain similarity metrics.";

    // --- image / io -------------------------------------------------------
    m.def("load_image", [](const std::string& path) { return from_image(load_image(path)); },
          py::arg("path"), "Load a PGM (P5) or raw-tensor (.awt) image as a 2D float64 array.");
    m.def("save_image",
          [](const Array2D& img, const std::string& path) { save_image(to_image(img), path); },
          py::arg("image"), py::arg("path"),
          "Save to 16-bit PGM (.pgm, clamped to [0,1]) or lossless raw tensor (anything else).");
    m.def("standard_normal_field",
          [](std::uint64_t seed, int width, int height) {
              SeededRng rng(seed);
              return from_image(standard_normal_field(rng, width, height));
          },
          py::arg("seed"), py::arg("width"), py::arg("height"));

    // --- wavelets -----------------------------------------------------------
    m.def("atrous_convolve",
          [](const Array2D& img, const std::vector<double>& taps, int dilation) {
              return from_image(atrous_convolve(to_image(img), Kernel1D(taps), dilation));
          },
          py::arg("image"), py::arg("taps"), py::arg("dilation") = 1,
          "Separable dilated convolution with mirrored boundaries.");
    m.def("b3_taps", []() { return b3_spline_kernel().taps(); },
          "The starlet smoothing filter [1/16, 1/4, 3/8, 1/4, 1/16].");
    m.def("starlet_decompose",
          [](const Array2D& img, int scales) {
              WaveletPyramid pyr = starlet_decompose(to_image(img), scales);
              return py::make_tuple(stack_images(pyr.planes), from_image(pyr.residual));
          },
          py::arg("image"), py::arg("scales") = 4,
          "Returns (planes[S,H,W], residual[H,W]); planes + residual sums back to the input.");
    m.def("starlet_reconstruct",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& planes,
             const Array2D& residual) {
              auto buf = planes.request();
              if (buf.ndim != 3) throw ParameterError("planes must be a 3D array");
              WaveletPyramid pyr;
              pyr.residual = to_image(residual);
              const int h = static_cast<int>(buf.shape[1]);
              const int w = static_cast<int>(buf.shape[2]);
              const double* p = static_cast<const double*>(buf.ptr);
              for (py::ssize_t s = 0; s < buf.shape[0]; ++s) {
                  std::vector<double> px(p + s * h * w, p + (s + 1) * h * w);
                  pyr.planes.emplace_back(w, h, std::move(px));
              }
              return from_image(starlet_reconstruct(pyr));
          },
          py::arg("planes"), py::arg("residual"));
    m.def("dwt2_forward",
          [](const Array2D& img, int levels) {
              DwtCoefficients c = dwt2_forward(to_image(img), levels);
              py::list details;
              for (const auto& lv : c.details)
                  details.append(py::make_tuple(from_image(lv.lh), from_image(lv.hl),
                                                from_image(lv.hh)));
              return py::make_tuple(details, from_image(c.approx));
          },
          py::arg("image"), py::arg("levels") = 1,
          "Orthonormal Haar analysis: ([(lh, hl, hh), ...], approx).");
    m.def("dwt2_inverse",
          [](const py::list& details, const Array2D& approx) {
              DwtCoefficients c;
              c.approx = to_image(approx);
              for (const auto& item : details) {
                  auto t = item.cast<py::tuple>();
                  DwtCoefficients::Level lv;
                  lv.lh = to_image(t[0].cast<Array2D>());
                  lv.hl = to_image(t[1].cast<Array2D>());
                  lv.hh = to_image(t[2].cast<Array2D>());
                  c.details.push_back(std::move(lv));
              }
              return from_image(dwt2_inverse(c));
          },
          py::arg("details"), py::arg("approx"));

    // --- diffusion ----------------------------------------------------------
    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("steps", &NoiseSchedule::steps)
        .def_readonly("betas", &NoiseSchedule::betas)
        .def_readonly("alphas", &NoiseSchedule::alphas)
        .def_readonly("alpha_bars", &NoiseSchedule::alpha_bars)
        .def("dump_table", &NoiseSchedule::dump_table);
    m.def("linear_beta_schedule", &make_schedule, py::arg("steps") = 100,
          py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02);
    m.def("forward_marginal",
          [](const Array2D& x0, int t, const Array2D& eps, const NoiseSchedule& sched) {
              return from_image(forward_marginal(to_image(x0), t, to_image(eps), sched));
          },
          py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));
    m.def("predict_x0",
          [](const Array2D& x_t, int t, const Array2D& eps_pred, const NoiseSchedule& sched) {
              return from_image(predict_x0(to_image(x_t), t, to_image(eps_pred), sched));
          },
          py::arg("x_t"), py::arg("t"), py::arg("eps_pred"), py::arg("schedule"));

    // --- conditioning ---------------------------------------------------------
    m.def("toy_text_embed",
          [](const std::string& label, int dim) {
              return toy_text_embed(LabelPrompt{label}, dim).values;
          },
          py::arg("label"), py::arg("dim") = 16);
    m.def("toy_image_embed",
          [](const Array2D& img, int dim) { return ToyImageEmbedder(dim).embed(to_image(img)).values; },
          py::arg("image"), py::arg("dim") = 16);
    m.def("cosine_alignment_loss",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              return cosine_alignment_loss({a, EmbeddingSource::ToyImage},
                                           {b, EmbeddingSource::ToyText});
          },
          py::arg("z_img"), py::arg("z_txt"));

    // --- phantoms -------------------------------------------------------------
    m.def("generate_phantom",
          [](int width, int height, int n_blines, double speckle_sigma, bool irregular_pleura,
             std::uint64_t seed) {
              PhantomParams p;
              p.width = width;
              p.height = height;
              p.n_blines = n_blines;
              p.speckle_sigma = speckle_sigma;
              p.irregular_pleura = irregular_pleura;
              p.seed = seed;
              auto [img, label] = generate_phantom(p);
              return py::make_tuple(from_image(img), label.text);
          },
          py::arg("width") = 32, py::arg("height") = 32, py::arg("n_blines") = 0,
          py::arg("speckle_sigma") = 0.0, py::arg("irregular_pleura") = false, py::arg("seed") = 0,
          "Returns (image, label_text).");

    // --- metrics ----------------------------------------------------------------
    m.def("ssim", [](const Array2D& x, const Array2D& y) { return ssim(to_image(x), to_image(y)); },
          py::arg("x"), py::arg("y"));
    m.def("psnr", [](const Array2D& x, const Array2D& y) { return psnr(to_image(x), to_image(y)); },
          py::arg("x"), py::arg("y"));
    m.def("cw_ssim",
          [](const Array2D& x, const Array2D& y, int scales, int window) {
              CwSsimParams p;
              p.scales = scales;
              p.window = window;
              return cw_ssim(to_image(x), to_image(y), p);
          },
          py::arg("x"), py::arg("y"), py::arg("scales") = 3, py::arg("window") = 7);

    // --- training / sampling ------------------------------------------------------
    m.def("train_dataset",
          [](const std::string& data_dir, const std::string& config_text, const std::string& out_dir) {
              TrainingConfig cfg = config_text.empty() ? TrainingConfig{}
                                                       : TrainingConfig::from_key_values(config_text);
              Dataset ds = Dataset::load(data_dir, cfg.scales, cfg.embed_dim);
              TrainOptions options;
              options.out_dir = out_dir;
              TrainResult result = train(ds, cfg, options);
              py::list curve;
              for (const auto& row : result.curve)
                  curve.append(py::make_tuple(row.step, row.total, row.mse, row.align));
              return curve;
          },
          py::arg("data_dir"), py::arg("config_text") = "", py::arg("out_dir") = "run",
          "Train on a dataset directory; returns the loss curve rows.");
    m.def("sample_from_checkpoint",
          [](const std::string& checkpoint_dir, const Array2D& reference, const std::string& label,
             std::uint64_t seed, int count, bool use_ema) {
              if (count < 1) throw ParameterError("count must be >= 1");
              Checkpoint ckpt = load_checkpoint(checkpoint_dir);
              DenoiserParams params = ckpt.params;
              if (use_ema) params.set = ckpt.ema;
              WaveletPyramid f = encoder_features(to_image(reference), ckpt.config.scales);
              ConditioningEmbedding z_y = toy_text_embed(LabelPrompt{label}, ckpt.config.embed_dim);
              NoiseSchedule sched = ckpt.config.schedule();
              std::vector<Image> out;
              for (int i = 0; i < count; ++i) {
                  SamplerConfig cfg;
                  cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
                  out.push_back(sample(params, sched, z_y, f, cfg));
              }
              return stack_images(out);
          },
          py::arg("checkpoint_dir"), py::arg("reference"), py::arg("label"), py::arg("seed") = 0,
          py::arg("count") = 1, py::arg("use_ema") = true,
          "Sample [count, H, W] images conditioned on a label and a reference image.");
}
