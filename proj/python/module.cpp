// python bindings for the sanitization toolkit's main operations

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sanitone/config.hpp"
#include "sanitone/cyclegan.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/evaluation.hpp"
#include "sanitone/features.hpp"
#include "sanitone/pipeline.hpp"
#include "sanitone/resample.hpp"
#include "sanitone/vocoder.hpp"
#include "sanitone/wav_io.hpp"

namespace py = pybind11;
using namespace sanitone;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix matrix_from_numpy(const DoubleArray& a) {
  if (a.ndim() != 2) throw DimensionMismatch("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy_n(a.data(), m.size(), m.data().data());
  return m;
}

py::array_t<double> matrix_to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy_n(m.data().data(), m.size(), out.mutable_data());
  return out;
}

std::vector<double> vector_from_numpy(const DoubleArray& a) {
  if (a.ndim() != 1) throw DimensionMismatch("expected a 1-D array");
  return {a.data(), a.data() + a.shape(0)};
}

py::array_t<double> vector_to_numpy(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy_n(v.data(), v.size(), out.mutable_data());
  return out;
}

Waveform waveform_from_numpy(const DoubleArray& samples, int rate_hz) {
  Waveform w;
  w.samples = vector_from_numpy(samples);
  w.sample_rate_hz = rate_hz;
  return w;
}

// whole-pipeline training convenience: waveform lists in, frozen filter out
FrozenFilter train_filter_py(const std::vector<std::pair<DoubleArray, int>>& x_wavs,
                             const std::vector<std::pair<DoubleArray, int>>& y_wavs,
                             const VocoderConfig& vocoder, const FeatureConfig& features,
                             const ArchDescriptor& arch, const TrainConfig& train_cfg) {
  auto extract = [&](const std::vector<std::pair<DoubleArray, int>>& wavs,
                     std::vector<F0Track>& tracks, std::vector<McepSequence>& mceps,
                     std::vector<McepSequence>& pooled) {
    for (const auto& [samples, rate] : wavs) {
      Waveform w = waveform_from_numpy(samples, rate);
      if (w.sample_rate_hz != 16000) w = resample(w, 16000);
      const AnalysisResult a = analyze(w, vocoder);
      McepSequence m = sp_to_mcep(a.spectral_envelope, features);
      tracks.push_back(a.f0);
      pooled.push_back(m);
      mceps.push_back(std::move(m));
    }
  };

  std::vector<F0Track> tracks_x, tracks_y;
  std::vector<McepSequence> mceps_x, mceps_y, pooled;
  extract(x_wavs, tracks_x, mceps_x, pooled);
  extract(y_wavs, tracks_y, mceps_y, pooled);
  if (mceps_x.empty() || mceps_y.empty())
    throw EmptyCorpus("both waveform lists must be non-empty");

  const F0Stats f0_src = compute_f0_stats(tracks_x);
  const F0Stats f0_tgt = compute_f0_stats(tracks_y);
  const FeatureStats stats = compute_feature_stats(pooled);
  for (auto& m : mceps_x) m = normalize(m, stats);
  for (auto& m : mceps_y) m = normalize(m, stats);

  auto [model, history] = train(mceps_x, mceps_y, arch, train_cfg);
  return freeze(model, f0_src, f0_tgt, stats, vocoder, features);
}

}  // namespace

PYBIND11_MODULE(_sanitone, m) {
  m.doc() = "feature-level voice sanitization: vocoder analysis, "
            "style conversion, resynthesis, and evaluation metrics";

  py::register_exception<Error>(m, "SanitoneError");

  // ---- signal io ----
  py::class_<Waveform>(m, "Waveform")
      .def(py::init([](const DoubleArray& samples, int rate) {
             return waveform_from_numpy(samples, rate);
           }),
           py::arg("samples"), py::arg("sample_rate_hz"))
      .def_property_readonly(
          "samples", [](const Waveform& w) { return vector_to_numpy(w.samples); })
      .def_readonly("sample_rate_hz", &Waveform::sample_rate_hz)
      .def("__len__", &Waveform::size)
      .def("duration_s", &Waveform::duration_s)
      .def("rms", &Waveform::rms);

  m.def("read_wav", &read_wav, py::arg("path"));
  m.def("write_wav", &write_wav, py::arg("path"), py::arg("waveform"));
  m.def("resample", &resample, py::arg("waveform"), py::arg("target_hz"));

  // ---- vocoder ----
  py::class_<VocoderConfig>(m, "VocoderConfig")
      .def(py::init<>())
      .def_readwrite("frame_period_ms", &VocoderConfig::frame_period_ms)
      .def_readwrite("fft_size", &VocoderConfig::fft_size)
      .def_readwrite("f0_floor_hz", &VocoderConfig::f0_floor_hz)
      .def_readwrite("f0_ceil_hz", &VocoderConfig::f0_ceil_hz);

  py::class_<AnalysisResult>(m, "AnalysisResult")
      .def_property_readonly(
          "f0", [](const AnalysisResult& a) { return vector_to_numpy(a.f0.values_hz); })
      .def_property_readonly("spectral_envelope",
                             [](const AnalysisResult& a) {
                               return matrix_to_numpy(a.spectral_envelope);
                             })
      .def_property_readonly(
          "aperiodicity",
          [](const AnalysisResult& a) { return matrix_to_numpy(a.aperiodicity); })
      .def_readonly("sample_rate_hz", &AnalysisResult::sample_rate_hz)
      .def_readonly("fft_size", &AnalysisResult::fft_size)
      .def_property_readonly(
          "frame_period_ms",
          [](const AnalysisResult& a) { return a.f0.frame_period_ms; })
      .def("frames", &AnalysisResult::frames);

  m.def("analyze", &analyze, py::arg("waveform"),
        py::arg("config") = VocoderConfig{});
  m.def("synthesize", &synthesize, py::arg("analysis"));
  m.def(
      "replace_analysis",
      [](const AnalysisResult& a, const DoubleArray& f0, const DoubleArray& sp,
         const DoubleArray& ap) {
        AnalysisResult out = a;
        out.f0.values_hz = vector_from_numpy(f0);
        out.spectral_envelope = matrix_from_numpy(sp);
        out.aperiodicity = matrix_from_numpy(ap);
        return out;
      },
      py::arg("analysis"), py::arg("f0"), py::arg("spectral_envelope"),
      py::arg("aperiodicity"),
      "Copy of an analysis with the three parts replaced.");

  // ---- features ----
  m.def(
      "sp_to_mcep",
      [](const DoubleArray& sp, int order, double alpha) {
        return matrix_to_numpy(sp_to_mcep(matrix_from_numpy(sp), order, alpha).coeffs);
      },
      py::arg("spectral_envelope"), py::arg("order") = 24, py::arg("alpha") = 0.42);
  m.def(
      "mcep_to_sp",
      [](const DoubleArray& coeffs, int fft_size, double alpha) {
        McepSequence m2;
        m2.coeffs = matrix_from_numpy(coeffs);
        m2.order = static_cast<int>(m2.coeffs.cols()) - 1;
        m2.alpha = alpha;
        return matrix_to_numpy(mcep_to_sp(m2, fft_size));
      },
      py::arg("mcep"), py::arg("fft_size") = 1024, py::arg("alpha") = 0.42);

  py::class_<F0Stats>(m, "F0Stats")
      .def(py::init<>())
      .def_readwrite("mean_log_f0", &F0Stats::mean_log_f0)
      .def_readwrite("std_log_f0", &F0Stats::std_log_f0)
      .def_readwrite("voiced_frame_count", &F0Stats::voiced_frame_count);

  m.def(
      "compute_f0_stats",
      [](const std::vector<DoubleArray>& tracks) {
        std::vector<F0Track> wrapped;
        for (const auto& t : tracks) {
          F0Track track;
          track.values_hz = vector_from_numpy(t);
          wrapped.push_back(std::move(track));
        }
        return compute_f0_stats(wrapped);
      },
      py::arg("tracks"));
  m.def(
      "convert_log_f0",
      [](const DoubleArray& track, const F0Stats& src, const F0Stats& tgt) {
        F0Track t;
        t.values_hz = vector_from_numpy(track);
        return vector_to_numpy(convert_log_f0(t, src, tgt).values_hz);
      },
      py::arg("f0"), py::arg("src"), py::arg("tgt"));

  // ---- conversion model ----
  py::class_<ArchDescriptor>(m, "ArchDescriptor")
      .def(py::init<>())
      .def_readwrite("feature_dim", &ArchDescriptor::feature_dim)
      .def_readwrite("gen_widths", &ArchDescriptor::gen_widths)
      .def_readwrite("gen_kernel", &ArchDescriptor::gen_kernel)
      .def_readwrite("res_kernel", &ArchDescriptor::res_kernel)
      .def_readwrite("residual_blocks", &ArchDescriptor::residual_blocks)
      .def_readwrite("disc_widths", &ArchDescriptor::disc_widths)
      .def_readwrite("disc_kernel", &ArchDescriptor::disc_kernel);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("lr_generator", &TrainConfig::lr_generator)
      .def_readwrite("lr_discriminator", &TrainConfig::lr_discriminator)
      .def_readwrite("lambda_cycle", &TrainConfig::lambda_cycle)
      .def_readwrite("lambda_identity", &TrainConfig::lambda_identity)
      .def_readwrite("identity_cutoff_iter", &TrainConfig::identity_cutoff_iter)
      .def_readwrite("segment_frames", &TrainConfig::segment_frames)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<FrozenFilter>(m, "FrozenFilter")
      .def_property_readonly("single_precision",
                             [](const FrozenFilter& f) { return f.single_precision; })
      .def_property_readonly("f0_src", [](const FrozenFilter& f) { return f.f0_src; })
      .def_property_readonly("f0_tgt", [](const FrozenFilter& f) { return f.f0_tgt; })
      .def(
          "convert_mcep",
          [](const FrozenFilter& f, const DoubleArray& coeffs) {
            McepSequence m2;
            m2.coeffs = matrix_from_numpy(coeffs);
            m2.order = f.features.order;
            m2.alpha = f.features.alpha;
            return matrix_to_numpy(f.convert(m2).coeffs);
          },
          py::arg("mcep"));

  py::class_<FeatureConfig>(m, "FeatureConfig")
      .def(py::init<>())
      .def_readwrite("order", &FeatureConfig::order)
      .def_readwrite("alpha", &FeatureConfig::alpha);

  m.def("train_filter", &train_filter_py, py::arg("emotional_wavs"),
        py::arg("neutral_wavs"), py::arg("vocoder") = VocoderConfig{},
        py::arg("features") = FeatureConfig{}, py::arg("arch") = ArchDescriptor{},
        py::arg("train") = TrainConfig{},
        "Full training flow: analyze, code, normalize, train, freeze.");

  m.def("save_filter", &save_filter, py::arg("path"), py::arg("filter"));
  m.def("load_filter", &load_filter, py::arg("path"));
  m.def("to_single_precision", &to_single_precision, py::arg("filter"));

  // ---- pipeline ----
  m.def("sanitize", &sanitize, py::arg("waveform"), py::arg("filter"));

  // ---- evaluation ----
  m.def(
      "word_error_rate",
      [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
        return word_error_rate(ref, hyp);
      },
      py::arg("reference"), py::arg("hypothesis"));
  m.def(
      "equal_error_rate",
      [](const DoubleArray& genuine, const DoubleArray& impostor) {
        ScoreSet s;
        s.genuine = vector_from_numpy(genuine);
        s.impostor = vector_from_numpy(impostor);
        return equal_error_rate(s);
      },
      py::arg("genuine"), py::arg("impostor"));
  m.def(
      "speaker_embedding",
      [](const AnalysisResult& a) { return vector_to_numpy(speaker_embedding(a)); },
      py::arg("analysis"));
  m.def(
      "speaker_score",
      [](const DoubleArray& a, const DoubleArray& b) {
        const auto va = vector_from_numpy(a);
        const auto vb = vector_from_numpy(b);
        return speaker_score(va, vb);
      },
      py::arg("embedding_a"), py::arg("embedding_b"));
  m.def(
      "spectrogram_stats",
      [](const Waveform& w, const VocoderConfig& cfg) {
        const SpectroStats s = spectrogram_stats(w, cfg);
        py::dict out;
        out["peak_amplitude"] = vector_to_numpy(s.peak_amplitude);
        out["intensity_db"] = vector_to_numpy(s.intensity_db);
        out["f0_hz"] = vector_to_numpy(s.f0_hz);
        return out;
      },
      py::arg("waveform"), py::arg("config") = VocoderConfig{});
}
