#pragma once

#include <string>
#include <vector>

#include "btc/chords.hpp"

namespace btc {

struct ChordInterval {
  double start = 0.0;  // seconds
  double end = 0.0;
  ChordLabel label;

  friend bool operator==(const ChordInterval&, const ChordInterval&) = default;
};

// Time-ordered, non-overlapping chord intervals for one song. Gaps are legal
// and mean "nothing annotated here".
using AnnotationTrack = std::vector<ChordInterval>;

// Enforces start < end per interval plus global ordering; names the first
// offending interval in the error.
inline void validate_track(const AnnotationTrack& track) {
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto& iv = track[i];
    if (!(iv.start < iv.end))
      fail(ErrorCode::data_error, "interval " + std::to_string(i) + " has start " +
                                      std::to_string(iv.start) + " >= end " +
                                      std::to_string(iv.end));
    if (i > 0 && iv.start < track[i - 1].end - 1e-9)
      fail(ErrorCode::data_error,
           "intervals " + std::to_string(i - 1) + " and " + std::to_string(i) +
               " overlap: [" + std::to_string(track[i - 1].start) + ", " +
               std::to_string(track[i - 1].end) + ") vs [" + std::to_string(iv.start) + ", " +
               std::to_string(iv.end) + ")");
  }
}

inline AnnotationTrack transpose_track(const AnnotationTrack& track, int k) {
  AnnotationTrack out = track;
  for (auto& iv : out) iv.label = transpose(iv.label, k);
  return out;
}

}  // namespace btc
