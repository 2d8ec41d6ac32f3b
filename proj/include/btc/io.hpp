#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btc/annotation.hpp"
#include "btc/features.hpp"
#include "btc/model.hpp"

namespace btc {

// Lab text format: one `start end chord` line per interval, seconds at six
// decimal places.
AnnotationTrack parse_lab(const std::string& path);
void write_lab(const AnnotationTrack& track, const std::string& path);

// BTCF feature binary: magic, version, frame/bin counts, sample rate, hop,
// then little-endian f32 payload in frame-major order.
FeatureMatrix read_btcf(const std::string& path);
void write_btcf(const FeatureMatrix& S, const std::string& path);

// Normalization stats as `key=value` text with full double precision.
NormStats read_stats(const std::string& path);
void write_stats(const NormStats& stats, const std::string& path);

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;  // ordered key=value
  std::vector<NamedTensor> tensors;
};

// BTCW checkpoint binary. Readers raise distinct typed errors for bad magic,
// truncation, unsupported version, and duplicate tensor names.
Checkpoint read_checkpoint(const std::string& path);
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);

struct LoadedModel {
  VocabKind vocab;
  NormStats stats;
  std::uint64_t seed;
  BtcModel<float> model;
};

void save_model(const BtcModel<float>& model, VocabKind vocab, const NormStats& stats,
                std::uint64_t seed, const std::string& path);
LoadedModel load_model(const std::string& path);

// One text dump per (layer, direction, head), named
// layer<L>_<f|b>_head<H>.txt with 1-based L and H; optional binary graymap
// twins. Returns the written paths. `layers` filters by 1-based index; empty
// selects every layer.
std::vector<std::string> write_attention(const AttentionMapSet& maps, const std::string& dir,
                                         const std::vector<int>& layers = {}, bool pgm = false);

struct ParsedAttention {
  int layer = 0;  // 1-based
  Direction dir = Direction::forward;
  int head = 0;  // 1-based
  int seq_len = 0;
  std::vector<float> probs;  // seq_len * seq_len row-major
};

// Reads one text dump back, enforcing the row-sum invariant (1 within 1e-4).
ParsedAttention parse_attention(const std::string& path);

}  // namespace btc
