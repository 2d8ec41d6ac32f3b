#include "btc/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace btc {

FeatureMatrix make_features(int n_frames) {
  if (n_frames < 0) fail(ErrorCode::data_error, "negative frame count");
  FeatureMatrix S;
  S.n_frames = n_frames;
  S.data.assign(static_cast<std::size_t>(n_frames) * kNumBins, 0.0f);
  return S;
}

void validate_features(const FeatureMatrix& S) {
  if (S.data.size() != static_cast<std::size_t>(S.n_frames) * kNumBins)
    fail(ErrorCode::data_error, "feature payload length " + std::to_string(S.data.size()) +
                                    " does not match " + std::to_string(S.n_frames) + " frames x " +
                                    std::to_string(kNumBins) + " bins");
  for (float v : S.data)
    if (!std::isfinite(v)) fail(ErrorCode::data_error, "non-finite feature value");
}

FeatureMatrix log_compress(const FeatureMatrix& S, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::config_error, "log eps must be positive");
  validate_features(S);
  FeatureMatrix out = S;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] < 0.0f)
      fail(ErrorCode::data_error,
           "negative magnitude " + std::to_string(out.data[i]) + " at flat index " +
               std::to_string(i));
    out.data[i] = static_cast<float>(std::log(static_cast<double>(out.data[i]) + eps));
  }
  return out;
}

NormStats fit_norm_stats(const std::vector<FeatureMatrix>& training) {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& S : training) {
    for (float v : S.data) sum += v;
    n += S.data.size();
  }
  if (n == 0) fail(ErrorCode::data_error, "cannot fit normalization stats on an empty set");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& S : training)
    for (float v : S.data) {
      const double c = v - mean;
      ss += c * c;
    }
  const double variance = ss / static_cast<double>(n);
  if (!(variance > 0.0))
    fail(ErrorCode::data_error, "normalization variance is zero (constant fitting data)");
  return NormStats{mean, variance};
}

FeatureMatrix apply_norm(const FeatureMatrix& S, const NormStats& stats) {
  if (!(stats.variance > 0.0))
    fail(ErrorCode::data_error, "normalization stats have non-positive variance");
  const double inv = 1.0 / std::sqrt(stats.variance);
  FeatureMatrix out = S;
  for (auto& v : out.data) v = static_cast<float>((v - stats.mean) * inv);
  return out;
}

std::vector<int> align_labels(const AnnotationTrack& track, int n_frames, const Vocabulary& v,
                              double sample_rate, int hop, int* remapped) {
  validate_track(track);
  const int nc_index = v.to_index(ChordLabel::none());
  std::vector<int> out(static_cast<std::size_t>(n_frames), nc_index);
  if (remapped) *remapped = 0;
  std::size_t cursor = 0;
  for (int t = 0; t < n_frames; ++t) {
    const double center = (t + 0.5) * hop / sample_rate;
    while (cursor < track.size() && track[cursor].end <= center) ++cursor;
    if (cursor >= track.size() || track[cursor].start > center) continue;
    const ChordLabel& label = track[cursor].label;
    if (remapped && v.kind() == VocabKind::majmin && label.is_pitched() &&
        reduce_to_majmin(label).kind == ChordKind::unknown)
      ++*remapped;
    out[static_cast<std::size_t>(t)] = v.to_index(label);
  }
  return out;
}

namespace {

FeatureSegment cut_segment(const FeatureMatrix& S, const std::vector<int>& labels, int start,
                           const std::string& song_id) {
  FeatureSegment seg;
  seg.song_id = song_id;
  seg.start_frame = start;
  seg.features.assign(static_cast<std::size_t>(kSegmentFrames) * kNumBins, 0.0f);
  seg.labels.assign(kSegmentFrames, 0);
  seg.valid.assign(kSegmentFrames, false);
  for (int t = 0; t < kSegmentFrames; ++t) {
    const int src = start + t;
    if (src >= S.n_frames) break;
    std::copy_n(S.data.begin() + static_cast<std::size_t>(src) * kNumBins, kNumBins,
                seg.features.begin() + static_cast<std::size_t>(t) * kNumBins);
    seg.labels[static_cast<std::size_t>(t)] = labels[static_cast<std::size_t>(src)];
    seg.valid[static_cast<std::size_t>(t)] = true;
  }
  return seg;
}

}  // namespace

std::vector<FeatureSegment> segment(const FeatureMatrix& S, const std::vector<int>& labels,
                                    SegmentMode mode, const std::string& song_id) {
  validate_features(S);
  if (static_cast<int>(labels.size()) != S.n_frames)
    fail(ErrorCode::shape_mismatch, "label count " + std::to_string(labels.size()) +
                                        " does not match " + std::to_string(S.n_frames) +
                                        " frames");
  std::vector<FeatureSegment> out;
  const int T = S.n_frames;
  if (T <= kSegmentFrames) {
    out.push_back(cut_segment(S, labels, 0, song_id));
    return out;
  }
  if (mode == SegmentMode::train) {
    const int stride = kSegmentFrames / 2;
    int start = 0;
    for (; start + kSegmentFrames <= T; start += stride)
      out.push_back(cut_segment(S, labels, start, song_id));
    if (out.back().start_frame != T - kSegmentFrames)
      out.push_back(cut_segment(S, labels, T - kSegmentFrames, song_id));
  } else {
    for (int start = 0; start < T; start += kSegmentFrames)
      out.push_back(cut_segment(S, labels, start, song_id));
  }
  return out;
}

std::pair<FeatureMatrix, AnnotationTrack> pitch_shift(const FeatureMatrix& S,
                                                      const AnnotationTrack& labels, int k) {
  if (k < -5 || k > 6)
    fail(ErrorCode::config_error, "pitch shift " + std::to_string(k) + " outside [-5, +6]");
  validate_features(S);
  AnnotationTrack shifted_track = transpose_track(labels, k);
  if (k == 0) return {S, std::move(shifted_track)};

  const float fill = S.data.empty() ? 0.0f : *std::min_element(S.data.begin(), S.data.end());
  const int shift = 2 * k;  // 24 bins per octave: one semitone = 2 bins
  FeatureMatrix out = S;
  for (int t = 0; t < S.n_frames; ++t)
    for (int b = 0; b < kNumBins; ++b) {
      const int src = b - shift;
      out.at(t, b) = (src >= 0 && src < kNumBins) ? S.at(t, src) : fill;
    }
  return {std::move(out), std::move(shifted_track)};
}

namespace {

void render_chord(FeatureMatrix& S, int frame_begin, int frame_end, const ChordLabel& label) {
  if (!label.is_pitched()) return;
  for (int pc : pitch_class_set(label))
    for (int oct = 2; oct <= 5; ++oct) {
      const int bin = (oct - 1) * 24 + 2 * pc;
      const float amp = static_cast<float>(std::pow(0.5, oct - 2));
      for (int t = frame_begin; t < frame_end; ++t) S.at(t, bin) = amp;
    }
}

}  // namespace

std::vector<SynthSong> synth_dataset(int n_songs, const Vocabulary& v, double noise_sigma,
                                     const Rng& rng) {
  if (n_songs < 0) fail(ErrorCode::config_error, "negative song count");
  if (noise_sigma < 0.0) fail(ErrorCode::config_error, "negative noise sigma");
  const int n_pitched = v.kind() == VocabKind::majmin ? 24 : 168;

  std::vector<SynthSong> out;
  out.reserve(static_cast<std::size_t>(n_songs));
  for (int i = 0; i < n_songs; ++i) {
    Rng r = rng.child(static_cast<std::uint64_t>(i));
    const int n_frames = 140 + static_cast<int>(r.uniform_int(91));

    SynthSong song;
    char name[32];
    std::snprintf(name, sizeof name, "song_%04d", i);
    song.id = name;
    song.features = make_features(n_frames);

    const double frame_dur = song.features.frame_duration();
    int frame = 0;
    while (frame < n_frames) {
      const int seg_len = std::min(5 + static_cast<int>(r.uniform_int(16)), n_frames - frame);
      const ChordLabel label = r.uniform() < 0.05
                                   ? ChordLabel::none()
                                   : v.from_index(static_cast<int>(r.uniform_int(n_pitched)));
      render_chord(song.features, frame, frame + seg_len, label);
      song.track.push_back({frame * frame_dur, (frame + seg_len) * frame_dur, label});
      frame += seg_len;
    }
    if (noise_sigma > 0.0)
      for (auto& x : song.features.data)
        x = std::max(0.0f, x + static_cast<float>(noise_sigma * r.normal()));
    out.push_back(std::move(song));
  }
  return out;
}

std::vector<std::vector<float>> chord_templates(const Vocabulary& v) {
  const int n_pitched = v.kind() == VocabKind::majmin ? 24 : 168;
  std::vector<std::vector<float>> out;
  out.reserve(static_cast<std::size_t>(n_pitched));
  for (int i = 0; i < n_pitched; ++i) {
    FeatureMatrix one = make_features(1);
    render_chord(one, 0, 1, v.from_index(i));
    out.push_back(std::move(one.data));
  }
  return out;
}

std::vector<int> template_classify(const FeatureMatrix& S, const Vocabulary& v) {
  validate_features(S);
  const auto templates = chord_templates(v);
  std::vector<double> tpl_norm(templates.size());
  double min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < templates.size(); ++j) {
    double ss = 0.0;
    for (float x : templates[j]) ss += static_cast<double>(x) * x;
    tpl_norm[j] = std::sqrt(ss);
    min_norm = std::min(min_norm, tpl_norm[j]);
  }
  const double threshold = 0.75 * min_norm;
  const int nc_index = v.to_index(ChordLabel::none());

  std::vector<int> out(static_cast<std::size_t>(S.n_frames), nc_index);
  for (int t = 0; t < S.n_frames; ++t) {
    const float* frame = S.data.data() + static_cast<std::size_t>(t) * kNumBins;
    double frame_ss = 0.0;
    for (int b = 0; b < kNumBins; ++b) frame_ss += static_cast<double>(frame[b]) * frame[b];
    const double frame_norm = std::sqrt(frame_ss);
    if (frame_norm < threshold) continue;
    double best = -2.0;
    int best_j = 0;
    for (std::size_t j = 0; j < templates.size(); ++j) {
      double dot = 0.0;
      for (int b = 0; b < kNumBins; ++b) dot += static_cast<double>(frame[b]) * templates[j][b];
      const double cosine = dot / (frame_norm * tpl_norm[j]);
      if (cosine > best) {
        best = cosine;
        best_j = static_cast<int>(j);
      }
    }
    out[static_cast<std::size_t>(t)] = best_j;
  }
  return out;
}

}  // namespace btc
