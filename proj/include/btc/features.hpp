#pragma once

#include <string>
#include <vector>

#include "btc/annotation.hpp"
#include "btc/chords.hpp"
#include "btc/rng.hpp"

namespace btc {

inline constexpr int kNumBins = 144;  // 6 octaves x 24 bins from C1
inline constexpr int kSegmentFrames = 108;
inline constexpr double kSampleRate = 22050.0;
inline constexpr int kHop = 2048;
inline constexpr double kLogEps = 1e-6;

// Row-major T x 144 constant-Q magnitude (or log/normalized) matrix.
struct FeatureMatrix {
  int n_frames = 0;
  std::vector<float> data;  // n_frames * kNumBins
  double sample_rate = kSampleRate;
  int hop = kHop;

  float at(int t, int b) const { return data[static_cast<std::size_t>(t) * kNumBins + b]; }
  float& at(int t, int b) { return data[static_cast<std::size_t>(t) * kNumBins + b]; }
  double frame_duration() const { return hop / sample_rate; }
};

FeatureMatrix make_features(int n_frames);

// Rejects wrong payload size and non-finite values.
void validate_features(const FeatureMatrix& S);

struct NormStats {
  double mean = 0.0;
  double variance = 1.0;
};

struct FeatureSegment {
  std::vector<float> features;  // kSegmentFrames * kNumBins
  std::vector<int> labels;      // kSegmentFrames
  std::vector<bool> valid;      // false on zero-padded tail frames
  std::string song_id;
  int start_frame = 0;
};

// ln(S + eps) elementwise; input must be non-negative.
FeatureMatrix log_compress(const FeatureMatrix& S, double eps = kLogEps);

// Global scalar mean/variance over every value of the fitting set.
NormStats fit_norm_stats(const std::vector<FeatureMatrix>& training);

FeatureMatrix apply_norm(const FeatureMatrix& S, const NormStats& stats);

// One vocabulary index per frame, chosen by the interval containing the frame
// center (t + 0.5) * hop / sr under half-open [start, end) intervals.
// Uncovered frames get the no-chord index. For the majmin vocabulary, frames
// whose label folds to unknown are counted into *remapped (they land on
// no-chord via Vocabulary::to_index).
std::vector<int> align_labels(const AnnotationTrack& track, int n_frames, const Vocabulary& v,
                              double sample_rate = kSampleRate, int hop = kHop,
                              int* remapped = nullptr);

enum class SegmentMode {
  train,      // stride 54 plus a final window anchored at T-108
  inference,  // stride 108, zero-padded tail
};

std::vector<FeatureSegment> segment(const FeatureMatrix& S, const std::vector<int>& labels,
                                    SegmentMode mode, const std::string& song_id = "");

// Shifts every frame's bins up by 2k (one semitone = 2 bins at 24 bins per
// octave); vacated bins take the matrix minimum; labels transpose by k.
std::pair<FeatureMatrix, AnnotationTrack> pitch_shift(const FeatureMatrix& S,
                                                      const AnnotationTrack& labels, int k);

struct SynthSong {
  std::string id;
  FeatureMatrix features;
  AnnotationTrack track;
};

// Random chord progressions rendered as idealized CQT energy: amplitude
// 0.5^(oct-2) at bin (oct-1)*24 + 2*pc for octaves 2..5 per chord pitch
// class, plus clamped Gaussian noise. Deterministic in rng's seed; song i
// uses the child stream rng.child(i).
std::vector<SynthSong> synth_dataset(int n_songs, const Vocabulary& v, double noise_sigma,
                                     const Rng& rng);

// Idealized 144-bin energy vectors, one per pitched vocabulary entry, exactly
// as the generator renders them; used by the nearest-template oracle.
std::vector<std::vector<float>> chord_templates(const Vocabulary& v);

// Nearest-template classifier on raw (linear) features: cosine similarity
// against chord_templates, no-chord when the frame norm is below 0.75x the
// smallest template norm. Returns one vocabulary index per frame.
std::vector<int> template_classify(const FeatureMatrix& S, const Vocabulary& v);

}  // namespace btc
