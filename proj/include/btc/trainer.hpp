#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "btc/features.hpp"
#include "btc/model.hpp"
#include "btc/tensor.hpp"

namespace btc {

struct TrainConfig {
  double lr = 1e-4;
  double decay = 0.95;
  int patience_epochs = 10;
  int batch_size = 16;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  // Stop as soon as validation accuracy reaches this value; > 1 disables.
  double target_val_accuracy = 2.0;

  void validate() const {
    if (lr < 0.0) fail(ErrorCode::config_error, "negative learning rate");
    if (!(decay > 0.0 && decay < 1.0))
      fail(ErrorCode::config_error, "decay must be in (0,1), got " + std::to_string(decay));
    if (patience_epochs < 1) fail(ErrorCode::config_error, "patience must be >= 1");
    if (batch_size < 1) fail(ErrorCode::config_error, "batch size must be >= 1");
    if (max_epochs < 1) fail(ErrorCode::config_error, "max epochs must be >= 1");
  }
};

// Bias-corrected Adam with per-parameter moment buffers mirroring the
// parameter shapes. Gradients are consumed (zeroed) by each step.
template <class S>
class AdamState {
 public:
  explicit AdamState(const std::vector<Tensor<S>>& params, double beta1 = 0.9,
                     double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.size()), S(0));
      v_.emplace_back(static_cast<std::size_t>(p.size()), S(0));
    }
  }

  std::int64_t steps() const { return t_; }

  void step(std::vector<Tensor<S>>& params, double lr) {
    if (params.size() != m_.size())
      fail(ErrorCode::shape_mismatch, "optimizer state does not match parameter list");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto data = params[i].mutable_data();
      auto grad = params[i].mutable_grad();
      if (m_[i].size() != data.size())
        fail(ErrorCode::shape_mismatch, "optimizer buffer shape drifted from parameter");
      for (std::size_t j = 0; j < data.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        const double m = beta1_ * static_cast<double>(m_[i][j]) + (1.0 - beta1_) * g;
        const double v = beta2_ * static_cast<double>(v_[i][j]) + (1.0 - beta2_) * g * g;
        m_[i][j] = static_cast<S>(m);
        v_[i][j] = static_cast<S>(v);
        data[j] -= static_cast<S>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps_));
        grad[j] = S(0);
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<S>> m_, v_;
};

template <class S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state, double lr) {
  state.step(params, lr);
}

template <class S>
Tensor<S> segment_to_tensor(const FeatureSegment& seg) {
  std::vector<S> data(seg.features.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<S>(seg.features[i]);
  return Tensor<S>::from({kSegmentFrames, kNumBins}, std::move(data), false);
}

// Correct frames over total non-padded frames, eval mode.
template <class S>
double frame_accuracy(const BtcModel<S>& model, const std::vector<FeatureSegment>& segments) {
  std::int64_t correct = 0, total = 0;
  for (const auto& seg : segments) {
    const std::vector<int> pred = model.predict(segment_to_tensor<S>(seg));
    for (int t = 0; t < kSegmentFrames; ++t) {
      if (!seg.valid[static_cast<std::size_t>(t)]) continue;
      ++total;
      if (pred[static_cast<std::size_t>(t)] == seg.labels[static_cast<std::size_t>(t)]) ++correct;
    }
  }
  if (total == 0) fail(ErrorCode::data_error, "no valid frames to score");
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct EpochRecord {
  int epoch = 0;        // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;      // rate in effect during this epoch's updates
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  bool diverged = false;
  bool stopped_early = false;
  bool reached_target = false;
};

// Epoch loop per the schedule: seeded shuffle, batched Adam steps on the
// per-frame mean loss, validation frame accuracy, lr * decay on every epoch
// without strict improvement, stop after `patience_epochs` consecutive
// non-improving epochs. The model ends at its best-accuracy parameters.
template <class S>
TrainingReport fit(BtcModel<S>& model, const std::vector<FeatureSegment>& train_set,
                   const std::vector<FeatureSegment>& val_set, const TrainConfig& cfg,
                   std::ostream* log = nullptr) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    fail(ErrorCode::data_error, "empty train or validation split");

  std::vector<Tensor<S>> params;
  for (const auto& [name, t] : model.named_params()) params.push_back(t);
  for (auto& p : params) p.zero_grad();
  AdamState<S> adam(params);
  Rng rng(cfg.seed);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto snapshot = [&]() {
    std::vector<std::vector<S>> copy;
    copy.reserve(params.size());
    for (const auto& p : params) copy.emplace_back(p.data().begin(), p.data().end());
    return copy;
  };
  auto restore = [&](const std::vector<std::vector<S>>& copy) {
    for (std::size_t i = 0; i < params.size(); ++i)
      std::copy(copy[i].begin(), copy[i].end(), params[i].mutable_data().begin());
  };

  TrainingReport report;
  std::vector<std::vector<S>> best_params = snapshot();
  double best_acc = -1.0;
  double lr = cfg.lr;
  int bad_streak = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t frames_sum = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      Tensor<S> batch_loss;
      std::int64_t batch_frames = 0;
      for (std::size_t i = at; i < end; ++i) {
        const FeatureSegment& seg = train_set[order[i]];
        std::int64_t n_valid = 0;
        for (bool v : seg.valid) n_valid += v ? 1 : 0;
        if (n_valid == 0) continue;
        Tensor<S> logits = model.forward(segment_to_tensor<S>(seg), true, rng);
        Tensor<S> seg_loss = scale(nll_loss(logits, seg.labels, seg.valid),
                                   static_cast<S>(n_valid));
        batch_loss = batch_loss.defined() ? add(batch_loss, seg_loss) : seg_loss;
        batch_frames += n_valid;
      }
      if (!batch_loss.defined()) continue;
      batch_loss = scale(batch_loss, static_cast<S>(1.0 / static_cast<double>(batch_frames)));
      const double value = static_cast<double>(batch_loss.item());
      if (!std::isfinite(value)) {
        report.diverged = true;
        restore(best_params);
        return report;
      }
      batch_loss.backward();
      adam.step(params, lr);
      loss_sum += value * static_cast<double>(batch_frames);
      frames_sum += batch_frames;
    }
    const double train_loss = frames_sum > 0 ? loss_sum / static_cast<double>(frames_sum) : 0.0;
    const double val_acc = frame_accuracy(model, val_set);
    report.epochs.push_back({epoch, train_loss, val_acc, lr});
    if (log)
      *log << "epoch=" << epoch << " loss=" << train_loss << " val_acc=" << val_acc
           << " lr=" << lr << "\n";

    if (val_acc > best_acc) {
      best_acc = val_acc;
      report.best_epoch = epoch;
      best_params = snapshot();
      bad_streak = 0;
    } else {
      ++bad_streak;
      lr *= cfg.decay;
    }
    if (cfg.target_val_accuracy <= 1.0 && val_acc >= cfg.target_val_accuracy) {
      report.reached_target = true;
      break;
    }
    if (bad_streak >= cfg.patience_epochs) {
      report.stopped_early = true;
      break;
    }
  }
  report.best_val_accuracy = best_acc;
  restore(best_params);
  return report;
}

}  // namespace btc
