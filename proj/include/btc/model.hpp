#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btc/errors.hpp"
#include "btc/rng.hpp"
#include "btc/tensor.hpp"

namespace btc {

inline constexpr double kLayerNormEps = 1e-5;

struct BtcConfig {
  int n_layers = 8;
  int n_heads = 4;
  int model_dim = 128;
  int conv_repeats = 2;
  int kernel = 3;
  double dropout = 0.2;
  int input_bins = 144;
  int vocab_size = 25;
  int seq_len = 108;

  void validate() const {
    if (n_layers < 1 || n_heads < 1 || model_dim < 1 || conv_repeats < 0 || input_bins < 1 ||
        vocab_size < 2 || seq_len < 1)
      fail(ErrorCode::config_error, "non-positive model dimension");
    if (model_dim % n_heads != 0)
      fail(ErrorCode::config_error, "model_dim " + std::to_string(model_dim) +
                                        " not divisible by n_heads " + std::to_string(n_heads));
    if (kernel < 1 || kernel % 2 == 0)
      fail(ErrorCode::config_error, "kernel width must be odd, got " + std::to_string(kernel));
    if (dropout < 0.0 || dropout >= 1.0)
      fail(ErrorCode::config_error, "dropout must be in [0,1), got " + std::to_string(dropout));
  }
};

// Closed-form parameter count: input projection, then per layer two
// directions of {4 attention projections, 2 layer norms, n_C convolutions}
// plus the combine projection, then the logit head.
inline std::int64_t param_count(const BtcConfig& cfg) {
  const std::int64_t d = cfg.model_dim, V = cfg.vocab_size;
  const std::int64_t attn = 4 * (d * d + d);
  const std::int64_t norms = 2 * 2 * d;
  const std::int64_t convs = cfg.conv_repeats * (d * d * cfg.kernel + d);
  const std::int64_t per_layer = 2 * (attn + norms + convs) + (2 * d * d + d);
  return cfg.input_bins * d + d + cfg.n_layers * per_layer + d * V + V;
}

enum class Direction : int { forward = 0, backward = 1 };

// Sinusoidal position table: row pos has sin(pos/10000^(2i/d)) at even
// columns and the matching cos at odd columns.
template <class S>
Tensor<S> positional_encoding(int T, int d) {
  if (d % 2 != 0)
    fail(ErrorCode::config_error, "positional encoding needs even dim, got " + std::to_string(d));
  if (T < 1) fail(ErrorCode::config_error, "positional encoding needs T >= 1");
  std::vector<S> data(static_cast<std::size_t>(T) * d);
  for (int pos = 0; pos < T; ++pos)
    for (int i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / d);
      data[static_cast<std::size_t>(pos) * d + 2 * i] = static_cast<S>(std::sin(pos * freq));
      data[static_cast<std::size_t>(pos) * d + 2 * i + 1] = static_cast<S>(std::cos(pos * freq));
    }
  return Tensor<S>::from({T, d}, std::move(data), false);
}

// Additive attention mask: 0 on admissible pairs, -inf elsewhere. Forward
// admits j <= i (frame and its past), backward admits j >= i.
template <class S>
Tensor<S> directional_mask(int T, Direction dir) {
  if (T < 1) fail(ErrorCode::config_error, "mask needs T >= 1");
  const S neg_inf = -std::numeric_limits<S>::infinity();
  std::vector<S> data(static_cast<std::size_t>(T) * T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      const bool open = dir == Direction::forward ? j <= i : j >= i;
      data[static_cast<std::size_t>(i) * T + j] = open ? S(0) : neg_inf;
    }
  return Tensor<S>::from({T, T}, std::move(data), false);
}

template <class S>
struct LinearParams {
  Tensor<S> w, b;
};

template <class S>
struct NormParams {
  Tensor<S> gain, bias;
};

template <class S>
struct AttentionParams {
  LinearParams<S> wq, wk, wv, wo;
};

template <class S>
struct DirectionParams {
  AttentionParams<S> attn;
  NormParams<S> norm1, norm2;
  std::vector<LinearParams<S>> convs;  // w is [d x d x k]
};

template <class S>
struct LayerParams {
  DirectionParams<S> fwd, bwd;
  LinearParams<S> combine;
};

// softmax(Q K^T / sqrt(d_K) + mask) V with dropout on the softmax weights in
// training mode. `capture`, when set, receives the pre-dropout weights.
template <class S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                    const Tensor<S>& mask, double drop_p, Rng* rng, bool training,
                    std::vector<float>* capture = nullptr) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.shape() != q.shape())
    fail(ErrorCode::shape_mismatch, "attention expects matching T x d_h inputs");
  const int d_k = q.dim(1);
  Tensor<S> scores = scale(matmul(q, transpose2d(k)), static_cast<S>(1.0 / std::sqrt(double(d_k))));
  Tensor<S> probs = softmax_rows(add(scores, mask));
  if (capture) capture->assign(probs.data().begin(), probs.data().end());
  if (training && drop_p > 0.0) probs = dropout(probs, drop_p, *rng, true);
  return matmul(probs, v);
}

// Multi-head block: per-head slices of the shared Q/K/V projections run
// scaled dot-product attention, heads concatenate, W_O projects back to d.
template <class S>
Tensor<S> multi_head(const Tensor<S>& x, const AttentionParams<S>& p, const Tensor<S>& mask,
                     int n_heads, double drop_p, Rng* rng, bool training,
                     std::vector<std::vector<float>>* capture = nullptr) {
  const int d = x.dim(x.rank() - 1);
  if (n_heads < 1 || d % n_heads != 0)
    fail(ErrorCode::config_error,
         "dim " + std::to_string(d) + " not divisible by " + std::to_string(n_heads) + " heads");
  const int d_h = d / n_heads;
  Tensor<S> q = linear(x, p.wq.w, p.wq.b);
  Tensor<S> k = linear(x, p.wk.w, p.wk.b);
  Tensor<S> v = linear(x, p.wv.w, p.wv.b);
  if (capture) capture->resize(static_cast<std::size_t>(n_heads));
  Tensor<S> heads;
  for (int j = 0; j < n_heads; ++j) {
    Tensor<S> hj = attention(slice_last(q, j * d_h, d_h), slice_last(k, j * d_h, d_h),
                             slice_last(v, j * d_h, d_h), mask, drop_p, rng, training,
                             capture ? &(*capture)[static_cast<std::size_t>(j)] : nullptr);
    heads = j == 0 ? hj : concat_last(heads, hj);
  }
  return linear(heads, p.wo.w, p.wo.b);
}

// n_C repetitions of conv -> ReLU -> dropout with the requested padding.
// Channel count is preserved throughout.
template <class S>
Tensor<S> conv_block(const Tensor<S>& x, const std::vector<LinearParams<S>>& convs, ConvPad pad,
                     double drop_p, Rng* rng, bool training) {
  Tensor<S> h = x;
  for (const auto& c : convs) {
    h = relu(conv1d(h, c.w, c.b, pad));
    if (training && drop_p > 0.0) h = dropout(h, drop_p, *rng, true);
  }
  return h;
}

struct AttentionMapSet {
  int n_layers = 0;
  int n_heads = 0;
  int seq_len = 0;
  // indexed [(layer * 2 + direction) * n_heads + head], each seq_len^2 row-major
  std::vector<std::vector<float>> maps;

  const std::vector<float>& at(int layer, Direction dir, int head) const {
    const std::size_t idx =
        (static_cast<std::size_t>(layer) * 2 + static_cast<std::size_t>(dir)) *
            static_cast<std::size_t>(n_heads) +
        static_cast<std::size_t>(head);
    if (layer < 0 || layer >= n_layers || head < 0 || head >= n_heads || idx >= maps.size())
      fail(ErrorCode::not_found, "attention map index out of range");
    return maps[idx];
  }
};

// One direction of a layer: masked multi-head attention, then a convolution
// block, each under a post-norm residual. The convolution pads on the side
// the mask keeps open, so the branch never reads across its causal boundary.
template <class S>
Tensor<S> direction_branch(const Tensor<S>& x, const DirectionParams<S>& dp, const Tensor<S>& mask,
                           ConvPad pad, int n_heads, double drop_p, Rng* rng, bool training,
                           std::vector<std::vector<float>>* capture = nullptr) {
  auto maybe_drop = [&](const Tensor<S>& t) {
    return training && drop_p > 0.0 ? dropout(t, drop_p, *rng, true) : t;
  };
  Tensor<S> mha = multi_head(x, dp.attn, mask, n_heads, drop_p, rng, training, capture);
  Tensor<S> a = layer_norm(add(x, maybe_drop(mha)), dp.norm1.gain, dp.norm1.bias,
                           static_cast<S>(kLayerNormEps));
  Tensor<S> cb = conv_block(a, dp.convs, pad, drop_p, rng, training);
  return layer_norm(add(a, maybe_drop(cb)), dp.norm2.gain, dp.norm2.bias,
                    static_cast<S>(kLayerNormEps));
}

// One encoder layer: the forward and backward branches run side by side,
// their outputs concatenate, and a linear map restores width d.
template <class S>
Tensor<S> bidirectional_layer(const Tensor<S>& x, const LayerParams<S>& lp, int n_heads,
                              double drop_p, const Tensor<S>& fwd_mask, const Tensor<S>& bwd_mask,
                              Rng* rng, bool training,
                              std::vector<std::vector<float>>* capture_fwd = nullptr,
                              std::vector<std::vector<float>>* capture_bwd = nullptr) {
  Tensor<S> b_fwd = direction_branch(x, lp.fwd, fwd_mask, ConvPad::left, n_heads, drop_p, rng,
                                     training, capture_fwd);
  Tensor<S> b_bwd = direction_branch(x, lp.bwd, bwd_mask, ConvPad::right, n_heads, drop_p, rng,
                                     training, capture_bwd);
  return linear(concat_last(b_fwd, b_bwd), lp.combine.w, lp.combine.b);
}

template <class S>
class BtcModel {
 public:
  BtcModel(const BtcConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.model_dim;
    input_ = make_linear("input", cfg_.input_bins, d, rng);
    layers_.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int i = 0; i < cfg_.n_layers; ++i) {
      const std::string base = "layer" + std::to_string(i) + ".";
      auto& lp = layers_[static_cast<std::size_t>(i)];
      for (Direction dir : {Direction::forward, Direction::backward}) {
        const std::string db = base + (dir == Direction::forward ? "fwd." : "bwd.");
        auto& dp = dir == Direction::forward ? lp.fwd : lp.bwd;
        dp.attn.wq = make_linear(db + "attn.wq", d, d, rng);
        dp.attn.wk = make_linear(db + "attn.wk", d, d, rng);
        dp.attn.wv = make_linear(db + "attn.wv", d, d, rng);
        dp.attn.wo = make_linear(db + "attn.wo", d, d, rng);
        dp.norm1 = make_norm(db + "norm1", d);
        dp.norm2 = make_norm(db + "norm2", d);
        dp.convs.resize(static_cast<std::size_t>(cfg_.conv_repeats));
        for (int c = 0; c < cfg_.conv_repeats; ++c)
          dp.convs[static_cast<std::size_t>(c)] =
              make_conv(db + "conv" + std::to_string(c), d, cfg_.kernel, rng);
      }
      lp.combine = make_linear(base + "combine", 2 * d, d, rng);
    }
    // Quarter-scale head init keeps initial logits near zero, so the loss
    // starts within a few percent of ln(vocab_size) regardless of d.
    head_ = make_linear("head", d, cfg_.vocab_size, rng, 0.25);
  }

  const BtcConfig& config() const { return cfg_; }

  const std::vector<std::pair<std::string, Tensor<S>>>& named_params() const { return params_; }

  Tensor<S> find_param(const std::string& name) const {
    for (const auto& [n, t] : params_)
      if (n == name) return t;
    fail(ErrorCode::not_found, "no parameter named \"" + name + "\"");
  }

  std::int64_t num_params() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
  }

  Tensor<S> forward(const Tensor<S>& features) const {
    return forward_impl(features, false, nullptr, nullptr);
  }

  Tensor<S> forward(const Tensor<S>& features, bool training, Rng& rng) const {
    return forward_impl(features, training, &rng, nullptr);
  }

  std::vector<int> predict(const Tensor<S>& features) const {
    Tensor<S> logits = forward(features);
    const int T = logits.dim(0), V = logits.dim(1);
    std::vector<int> out(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const S* row = logits.data().data() + static_cast<std::size_t>(t) * V;
      int best = 0;
      for (int c = 1; c < V; ++c)
        if (row[c] > row[best]) best = c;
      out[static_cast<std::size_t>(t)] = best;
    }
    return out;
  }

  AttentionMapSet attention_maps(const Tensor<S>& features) const {
    AttentionMapSet set;
    set.n_layers = cfg_.n_layers;
    set.n_heads = cfg_.n_heads;
    set.seq_len = features.dim(0);
    set.maps.resize(static_cast<std::size_t>(cfg_.n_layers) * 2 *
                    static_cast<std::size_t>(cfg_.n_heads));
    forward_impl(features, false, nullptr, &set);
    return set;
  }

 private:
  Tensor<S> forward_impl(const Tensor<S>& features, bool training, Rng* rng,
                         AttentionMapSet* maps) const {
    if (features.rank() != 2 || features.dim(1) != cfg_.input_bins)
      fail(ErrorCode::shape_mismatch, "expected T x " + std::to_string(cfg_.input_bins) +
                                          " features, got " + shape_str(features.shape()));
    const int T = features.dim(0);
    Tensor<S> x = add(linear(features, input_.w, input_.b),
                      positional_encoding<S>(T, cfg_.model_dim));
    if (training && cfg_.dropout > 0.0) x = dropout(x, cfg_.dropout, *rng, true);
    const Tensor<S> fwd_mask = directional_mask<S>(T, Direction::forward);
    const Tensor<S> bwd_mask = directional_mask<S>(T, Direction::backward);
    for (int i = 0; i < cfg_.n_layers; ++i) {
      std::vector<std::vector<float>>*cf = nullptr, *cb = nullptr;
      std::vector<std::vector<float>> buf_f, buf_b;
      if (maps) {
        cf = &buf_f;
        cb = &buf_b;
      }
      x = bidirectional_layer(x, layers_[static_cast<std::size_t>(i)], cfg_.n_heads, cfg_.dropout,
                              fwd_mask, bwd_mask, rng, training, cf, cb);
      if (maps)
        for (int h = 0; h < cfg_.n_heads; ++h) {
          maps->maps[(static_cast<std::size_t>(i) * 2 + 0) * cfg_.n_heads + h] =
              std::move(buf_f[static_cast<std::size_t>(h)]);
          maps->maps[(static_cast<std::size_t>(i) * 2 + 1) * cfg_.n_heads + h] =
              std::move(buf_b[static_cast<std::size_t>(h)]);
        }
    }
    return linear(x, head_.w, head_.b);
  }

  Tensor<S> track(const std::string& name, Tensor<S> t) {
    params_.emplace_back(name, t);
    return t;
  }

  static std::vector<S> xavier_data(std::int64_t n, int fan_in, int fan_out, Rng& rng,
                                    double scale) {
    const double limit = scale * std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<S> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = static_cast<S>(rng.uniform(-limit, limit));
    return data;
  }

  LinearParams<S> make_linear(const std::string& name, int d_in, int d_out, Rng& rng,
                              double scale = 1.0) {
    LinearParams<S> p;
    p.w = track(name + ".w", Tensor<S>::from({d_in, d_out},
                                             xavier_data(std::int64_t(d_in) * d_out, d_in, d_out,
                                                         rng, scale),
                                             true));
    p.b = track(name + ".b", Tensor<S>::zeros({d_out}, true));
    return p;
  }

  LinearParams<S> make_conv(const std::string& name, int d, int k, Rng& rng) {
    LinearParams<S> p;
    p.w = track(name + ".w",
                Tensor<S>::from({d, d, k},
                                xavier_data(std::int64_t(d) * d * k, d * k, d * k, rng, 1.0),
                                true));
    p.b = track(name + ".b", Tensor<S>::zeros({d}, true));
    return p;
  }

  NormParams<S> make_norm(const std::string& name, int d) {
    NormParams<S> p;
    p.gain = track(name + ".gain", Tensor<S>::full({d}, S(1), true));
    p.bias = track(name + ".bias", Tensor<S>::zeros({d}, true));
    return p;
  }

  BtcConfig cfg_;
  LinearParams<S> input_;
  std::vector<LayerParams<S>> layers_;
  LinearParams<S> head_;
  std::vector<std::pair<std::string, Tensor<S>>> params_;
};

}  // namespace btc
