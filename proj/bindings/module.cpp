#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "btc/chords.hpp"
#include "btc/features.hpp"
#include "btc/io.hpp"
#include "btc/metrics.hpp"
#include "btc/model.hpp"
#include "btc/pipeline.hpp"
#include "btc/trainer.hpp"

namespace py = pybind11;

namespace {

using LabTuple = std::tuple<double, double, std::string>;

btc::AnnotationTrack track_from_tuples(const std::vector<LabTuple>& intervals) {
  btc::AnnotationTrack track;
  for (const auto& [start, end, chord] : intervals)
    track.push_back({start, end, btc::parse_chord(chord)});
  btc::validate_track(track);
  return track;
}

std::vector<LabTuple> track_to_tuples(const btc::AnnotationTrack& track) {
  std::vector<LabTuple> out;
  for (const auto& iv : track) out.emplace_back(iv.start, iv.end, btc::format_chord(iv.label));
  return out;
}

btc::FeatureMatrix features_from_array(const py::array_t<float>& arr) {
  const auto buf = arr.request();
  if (buf.ndim != 2 || buf.shape[1] != btc::kNumBins)
    btc::fail(btc::ErrorCode::shape_mismatch,
              "expected a (T, " + std::to_string(btc::kNumBins) + ") float32 array");
  btc::FeatureMatrix S = btc::make_features(static_cast<int>(buf.shape[0]));
  const auto view = arr.unchecked<2>();
  for (int t = 0; t < S.n_frames; ++t)
    for (int b = 0; b < btc::kNumBins; ++b) S.at(t, b) = view(t, b);
  return S;
}

py::array_t<float> features_to_array(const btc::FeatureMatrix& S) {
  py::array_t<float> arr({S.n_frames, btc::kNumBins});
  std::memcpy(arr.mutable_data(), S.data.data(), S.data.size() * sizeof(float));
  return arr;
}

// Owns a model plus the preprocessing state needed to run it on raw features.
struct ModelHandle {
  btc::VocabKind vocab;
  btc::NormStats stats;
  std::uint64_t seed;
  btc::BtcModel<float> model;

  btc::Tensor<float> to_tensor(const py::array_t<float>& arr) const {
    const auto buf = arr.request();
    if (buf.ndim != 2)
      btc::fail(btc::ErrorCode::shape_mismatch, "expected a 2-d float32 array");
    std::vector<float> data(static_cast<std::size_t>(buf.shape[0] * buf.shape[1]));
    const auto view = arr.unchecked<2>();
    for (py::ssize_t t = 0; t < buf.shape[0]; ++t)
      for (py::ssize_t b = 0; b < buf.shape[1]; ++b)
        data[static_cast<std::size_t>(t * buf.shape[1] + b)] = view(t, b);
    return btc::Tensor<float>::from({static_cast<int>(buf.shape[0]),
                                     static_cast<int>(buf.shape[1])},
                                    std::move(data), false);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bi-directional transformer chord recognition core";

  py::register_exception<btc::Error>(m, "BtcError");

  m.def("canonical_chord", [](const std::string& text) {
    return btc::format_chord(btc::parse_chord(text));
  });
  m.def("transpose_chord", [](const std::string& text, int k) {
    return btc::format_chord(btc::transpose(btc::parse_chord(text), k));
  });
  m.def("chord_index", [](const std::string& text, const std::string& vocab) {
    return btc::Vocabulary::make(btc::vocab_kind_from_name(vocab))
        .to_index(btc::parse_chord(text));
  });
  m.def("index_chord", [](int index, const std::string& vocab) {
    return btc::format_chord(
        btc::Vocabulary::make(btc::vocab_kind_from_name(vocab)).from_index(index));
  });
  m.def("vocab_size", [](const std::string& vocab) {
    return btc::Vocabulary::make(btc::vocab_kind_from_name(vocab)).size();
  });

  m.def("positional_encoding", [](int T, int d) {
    const btc::Tensor<float> pe = btc::positional_encoding<float>(T, d);
    py::array_t<float> arr({T, d});
    std::memcpy(arr.mutable_data(), pe.data().data(),
                static_cast<std::size_t>(pe.size()) * sizeof(float));
    return arr;
  });

  m.def(
      "param_count",
      [](int layers, int heads, int dim, int conv_repeats, int kernel, int vocab_size) {
        btc::BtcConfig cfg;
        cfg.n_layers = layers;
        cfg.n_heads = heads;
        cfg.model_dim = dim;
        cfg.conv_repeats = conv_repeats;
        cfg.kernel = kernel;
        cfg.vocab_size = vocab_size;
        cfg.validate();
        return btc::param_count(cfg);
      },
      py::arg("layers") = 8, py::arg("heads") = 4, py::arg("dim") = 128,
      py::arg("conv_repeats") = 2, py::arg("kernel") = 3, py::arg("vocab_size") = 25);

  m.def(
      "synth_dataset",
      [](int n_songs, const std::string& vocab, double noise_sigma, std::uint64_t seed) {
        const btc::Vocabulary v = btc::Vocabulary::make(btc::vocab_kind_from_name(vocab));
        btc::Rng rng(seed);
        py::list out;
        for (const auto& song : btc::synth_dataset(n_songs, v, noise_sigma, rng)) {
          py::dict d;
          d["id"] = song.id;
          d["features"] = features_to_array(song.features);
          d["labels"] = track_to_tuples(song.track);
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("n_songs"), py::arg("vocab") = "majmin", py::arg("noise_sigma") = 0.1,
      py::arg("seed") = 0);

  m.def(
      "wcsr",
      [](const std::vector<LabTuple>& ref, const std::vector<LabTuple>& est,
         const std::string& comparator) {
        const std::vector<btc::ScoredPair> pairs = {
            {track_from_tuples(ref), track_from_tuples(est)}};
        return btc::wcsr(pairs, btc::comparator_from_name(comparator));
      },
      py::arg("ref"), py::arg("est"), py::arg("comparator") = "majmin");

  m.def(
      "evaluate",
      [](const std::vector<LabTuple>& ref, const std::vector<LabTuple>& est,
         const std::string& vocab) {
        const std::vector<btc::ScoredPair> pairs = {
            {track_from_tuples(ref), track_from_tuples(est)}};
        py::dict out;
        for (const auto& row : btc::report(pairs, btc::vocab_kind_from_name(vocab)))
          out[py::str(row.name)] = row.score;
        return out;
      },
      py::arg("ref"), py::arg("est"), py::arg("vocab") = "majmin");

  py::class_<ModelHandle>(m, "Model")
      .def_static(
          "create",
          [](int layers, int heads, int dim, int conv_repeats, int kernel, double dropout,
             const std::string& vocab, std::uint64_t seed) {
            const btc::VocabKind kind = btc::vocab_kind_from_name(vocab);
            btc::BtcConfig cfg;
            cfg.n_layers = layers;
            cfg.n_heads = heads;
            cfg.model_dim = dim;
            cfg.conv_repeats = conv_repeats;
            cfg.kernel = kernel;
            cfg.dropout = dropout;
            cfg.vocab_size = btc::Vocabulary::make(kind).size();
            btc::Rng rng(seed);
            return ModelHandle{kind, btc::NormStats{0.0, 1.0}, seed,
                               btc::BtcModel<float>(cfg, rng)};
          },
          py::arg("layers") = 2, py::arg("heads") = 4, py::arg("dim") = 64,
          py::arg("conv_repeats") = 2, py::arg("kernel") = 3, py::arg("dropout") = 0.2,
          py::arg("vocab") = "majmin", py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) {
                    btc::LoadedModel loaded = btc::load_model(path);
                    return ModelHandle{loaded.vocab, loaded.stats, loaded.seed,
                                       std::move(loaded.model)};
                  })
      .def("save",
           [](const ModelHandle& h, const std::string& path) {
             btc::save_model(h.model, h.vocab, h.stats, h.seed, path);
           })
      .def_property_readonly("num_params",
                             [](const ModelHandle& h) { return h.model.num_params(); })
      .def_property_readonly("vocab",
                             [](const ModelHandle& h) { return btc::vocab_kind_name(h.vocab); })
      .def_property_readonly("config",
                             [](const ModelHandle& h) {
                               const btc::BtcConfig& c = h.model.config();
                               py::dict d;
                               d["n_layers"] = c.n_layers;
                               d["n_heads"] = c.n_heads;
                               d["model_dim"] = c.model_dim;
                               d["conv_repeats"] = c.conv_repeats;
                               d["kernel"] = c.kernel;
                               d["dropout"] = c.dropout;
                               d["input_bins"] = c.input_bins;
                               d["vocab_size"] = c.vocab_size;
                               d["seq_len"] = c.seq_len;
                               return d;
                             })
      .def("logits",
           [](const ModelHandle& h, const py::array_t<float>& features) {
             const btc::Tensor<float> out = h.model.forward(h.to_tensor(features));
             py::array_t<float> arr({out.dim(0), out.dim(1)});
             std::memcpy(arr.mutable_data(), out.data().data(),
                         static_cast<std::size_t>(out.size()) * sizeof(float));
             return arr;
           })
      .def("predict",
           [](const ModelHandle& h, const py::array_t<float>& features) {
             return h.model.predict(h.to_tensor(features));
           })
      .def("predict_song",
           [](const ModelHandle& h, const py::array_t<float>& raw) {
             const btc::FeatureMatrix S = features_from_array(raw);
             const btc::Vocabulary v = btc::Vocabulary::make(h.vocab);
             return track_to_tuples(btc::merge_predictions(
                 btc::predict_song(h.model, h.stats, S), v, S.frame_duration()));
           })
      .def("attention",
           [](const ModelHandle& h, const py::array_t<float>& features) {
             const btc::AttentionMapSet maps = h.model.attention_maps(h.to_tensor(features));
             const int T = maps.seq_len;
             py::array_t<float> arr({maps.n_layers, 2, maps.n_heads, T, T});
             auto view = arr.mutable_unchecked<5>();
             for (int l = 0; l < maps.n_layers; ++l)
               for (int d = 0; d < 2; ++d)
                 for (int head = 0; head < maps.n_heads; ++head) {
                   const auto& p = maps.at(l, static_cast<btc::Direction>(d), head);
                   for (int i = 0; i < T; ++i)
                     for (int j = 0; j < T; ++j)
                       view(l, d, head, i, j) = p[static_cast<std::size_t>(i) * T + j];
                 }
             return arr;
           });
}
