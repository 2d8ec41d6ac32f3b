#pragma once

#include <vector>

#include "btc/annotation.hpp"
#include "btc/features.hpp"
#include "btc/model.hpp"
#include "btc/trainer.hpp"

namespace btc {

// Raw linear CQT -> log -> normalize -> non-overlapping windows -> argmax,
// stitched back to one label index per frame.
inline std::vector<int> predict_song(const BtcModel<float>& model, const NormStats& stats,
                                     const FeatureMatrix& raw) {
  if (model.config().input_bins != kNumBins)
    fail(ErrorCode::config_error, "model expects " + std::to_string(model.config().input_bins) +
                                      " input bins, features have " + std::to_string(kNumBins));
  const FeatureMatrix norm = apply_norm(log_compress(raw), stats);
  const std::vector<int> dummy(static_cast<std::size_t>(norm.n_frames), 0);
  std::vector<int> pred(static_cast<std::size_t>(norm.n_frames), 0);
  for (const auto& seg : segment(norm, dummy, SegmentMode::inference)) {
    const std::vector<int> p = model.predict(segment_to_tensor<float>(seg));
    for (int t = 0; t < kSegmentFrames; ++t)
      if (seg.valid[static_cast<std::size_t>(t)])
        pred[static_cast<std::size_t>(seg.start_frame + t)] = p[static_cast<std::size_t>(t)];
  }
  return pred;
}

// Runs of equal indices become intervals with frame-boundary times, tiling
// [0, n_frames * frame_dur) exactly.
inline AnnotationTrack merge_predictions(const std::vector<int>& pred, const Vocabulary& v,
                                         double frame_dur) {
  AnnotationTrack track;
  std::size_t run_start = 0;
  for (std::size_t t = 1; t <= pred.size(); ++t) {
    if (t < pred.size() && pred[t] == pred[run_start]) continue;
    track.push_back({static_cast<double>(run_start) * frame_dur,
                     static_cast<double>(t) * frame_dur, v.from_index(pred[run_start])});
    run_start = t;
  }
  return track;
}

}  // namespace btc
