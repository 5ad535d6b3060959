// stream.cc

// Copyright 2026 SDVAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.


#include "sdvad/stream.h"

#include <algorithm>
#include <string>

#include "sdvad/segmenter.h"

namespace sdvad {

int Detector::Context() const {
  return std::holds_alternative<MlpModel>(model) ? meta.context : 0;
}

void Detector::CheckDims(int feature_dim) const {
  if (meta.embedding_dim != embedding.size())
    throw ContractError("detector expects a speaker embedding of width " +
                        std::to_string(meta.embedding_dim) + ", got " +
                        std::to_string(embedding.size()));
  const long expected = static_cast<long>(feature_dim) * (2 * Context() + 1) + embedding.size();
  if (expected != InputDim(model))
    throw ContractError("model input width " + std::to_string(InputDim(model)) +
                        " does not match " + std::to_string(feature_dim) +
                        "-dim features (context " + std::to_string(Context()) + ", embedding " +
                        std::to_string(embedding.size()) + ")");
}

std::vector<double> Detector::Posteriors(const Matrix &feats) const {
  CheckDims(static_cast<int>(feats.cols()));
  FeatureMatrix x;
  x.values = feats;
  if (meta.bin > 1) x = BinFeatures(x, meta.bin);
  if (Context() > 0) x = ContextWindow(x, Context());
  if (embedding.size() > 0) x = AttachSpeaker(x, embedding);
  const Matrix post = Forward(model, x.values);
  return std::vector<double>(post.col(1).begin(), post.col(1).end());
}

Labels Detector::Detect(const Matrix &feats) const {
  const std::vector<double> post = Posteriors(feats);
  Labels labels = ExpandLabels(Threshold(post, this->post.threshold), meta.bin,
                               static_cast<std::size_t>(feats.rows()));
  if (this->post.smooth > 1) labels = Smooth(labels, this->post.smooth);
  if (this->post.min_gap > 0 || this->post.min_speech > 0)
    labels = MergeSegments(labels, this->post.min_gap, this->post.min_speech);
  return labels;
}

int Detector::Latency() const {
  return (meta.bin - 1) + Context() * meta.bin + SmoothLookahead(post.smooth);
}

std::size_t Detector::MaxMergeDelay() const { return post.min_gap + post.min_speech; }

StreamState::StreamState(const Detector &detector, int feature_dim)
    : det_(detector), dim_(feature_dim), bin_sum_(feature_dim, 0.0) {
  if (det_.meta.bin < 1) throw ConfigError("bin size must be >= 1");
  if (det_.post.smooth < 1) throw ConfigError("smoothing window must be >= 1");
  det_.CheckDims(feature_dim);
  if (const auto *lstm = std::get_if<LstmModel>(&det_.model)) lstm_ = InitialState(*lstm);
  input_.resize(static_cast<std::size_t>(InputDim(det_.model)));
}

void StreamState::Push(std::span<const double> frame, Labels *out) {
  if (finished_) throw ContractError("stream already finished");
  if (static_cast<int>(frame.size()) != dim_)
    throw ContractError("stream frame has " + std::to_string(frame.size()) + " values, expected " +
                        std::to_string(dim_));
  ++consumed_;
  for (int d = 0; d < dim_; ++d) bin_sum_[d] += frame[d];
  if (++bin_count_ == det_.meta.bin) CloseBin(out);
}

void StreamState::Finish(Labels *out) {
  if (finished_) return;
  finished_ = true;
  if (bin_count_ > 0) CloseBin(out);
  ClassifyReady(true, out);
  SmoothFlush(out);
  FillFlush(out);
  DropFlush(out);
}

void StreamState::CloseBin(Labels *out) {
  std::vector<double> row(dim_);
  for (int d = 0; d < dim_; ++d) row[d] = bin_sum_[d] / static_cast<double>(bin_count_);
  rows_.push_back(std::move(row));
  row_counts_.push_back(bin_count_);
  std::fill(bin_sum_.begin(), bin_sum_.end(), 0.0);
  bin_count_ = 0;
  ClassifyReady(false, out);
}

void StreamState::ClassifyReady(bool final, Labels *out) {
  const int r = det_.Context();
  const std::size_t known = row_base_ + rows_.size();
  while (next_step_ < known && (final || next_step_ + r < known)) {
    const std::size_t s = next_step_;
    std::size_t pos = 0;
    for (int j = -r; j <= r; ++j) {
      const long src = std::clamp<long>(static_cast<long>(s) + j, 0, static_cast<long>(known) - 1);
      const std::vector<double> &row = rows_[static_cast<std::size_t>(src) - row_base_];
      std::copy(row.begin(), row.end(), input_.begin() + pos);
      pos += row.size();
    }
    for (Eigen::Index i = 0; i < det_.embedding.size(); ++i) input_[pos++] = det_.embedding[i];
    Classify(input_, static_cast<std::size_t>(row_counts_[s - row_base_]), out);
    ++next_step_;
    // Keep the r rows behind the next step; row 0 is never needed again
    // once next_step_ > r.
    while (row_base_ + r < next_step_) {
      rows_.pop_front();
      row_counts_.pop_front();
      ++row_base_;
    }
  }
}

void StreamState::Classify(std::span<const double> input, std::size_t count, Labels *out) {
  double p1;
  if (const auto *mlp = std::get_if<MlpModel>(&det_.model))
    p1 = MlpForwardRow(*mlp, input).second;
  else
    p1 = LstmStep(std::get<LstmModel>(det_.model), &lstm_, input).second;
  const std::uint8_t label = Threshold(std::span<const double>(&p1, 1), det_.post.threshold)[0];
  for (std::size_t i = 0; i < count; ++i) SmoothPush(label, out);
}

void StreamState::SmoothPush(std::uint8_t label, Labels *out) {
  const int window = det_.post.smooth;
  if (window == 1) {
    FillPush(label, out);
    return;
  }
  if (raw_count_ == 0) first_raw_ = label;
  smooth_.push_back(label);
  ++raw_count_;
  const std::size_t ahead = static_cast<std::size_t>(SmoothLookahead(window));
  while (smooth_next_ + ahead < raw_count_) {
    const std::size_t behind = window - 1 - ahead;
    const long t = static_cast<long>(smooth_next_);
    int ones = 0;
    for (long j = t - static_cast<long>(behind); j <= t + static_cast<long>(ahead); ++j)
      ones += (j < 0 ? first_raw_ : smooth_[static_cast<std::size_t>(j) - smooth_base_]) ? 1 : 0;
    FillPush(2 * ones >= window ? 1 : 0, out);
    ++smooth_next_;
    while (smooth_base_ + behind < smooth_next_) {
      smooth_.pop_front();
      ++smooth_base_;
    }
  }
}

void StreamState::SmoothFlush(Labels *out) {
  const int window = det_.post.smooth;
  if (window == 1 || raw_count_ == 0) return;
  const long ahead = SmoothLookahead(window), behind = window - 1 - ahead;
  const long last = static_cast<long>(raw_count_) - 1;
  while (smooth_next_ < raw_count_) {
    const long t = static_cast<long>(smooth_next_);
    int ones = 0;
    for (long j = t - behind; j <= t + ahead; ++j) {
      const long k = std::min(j, last);
      ones += (k < 0 ? first_raw_ : smooth_[static_cast<std::size_t>(k) - smooth_base_]) ? 1 : 0;
    }
    FillPush(2 * ones >= window ? 1 : 0, out);
    ++smooth_next_;
    while (static_cast<long>(smooth_base_) + behind < static_cast<long>(smooth_next_) &&
           smooth_.size() > 1) {
      smooth_.pop_front();
      ++smooth_base_;
    }
  }
}

// Gap filling: a run of zeros is held until it is known to be either a
// short gap between two speech runs (filled) or not (kept).
void StreamState::FillPush(std::uint8_t label, Labels *out) {
  const std::size_t min_gap = det_.post.min_gap;
  if (label) {
    for (std::size_t i = 0; i < pending_zeros_; ++i) DropPush(1, out);
    pending_zeros_ = 0;
    gap_decided_ = false;
    seen_speech_ = true;
    DropPush(1, out);
    return;
  }
  if (!seen_speech_ || gap_decided_) {
    DropPush(0, out);
    return;
  }
  if (++pending_zeros_ >= min_gap) {
    for (std::size_t i = 0; i < pending_zeros_; ++i) DropPush(0, out);
    pending_zeros_ = 0;
    gap_decided_ = true;
  }
}

void StreamState::FillFlush(Labels *out) {
  for (std::size_t i = 0; i < pending_zeros_; ++i) DropPush(0, out);
  pending_zeros_ = 0;
}

// Short-segment removal: a run of ones is held until it reaches
// min_speech frames (kept) or ends early (dropped).
void StreamState::DropPush(std::uint8_t label, Labels *out) {
  const std::size_t min_speech = det_.post.min_speech;
  if (label) {
    if (keep_run_) {
      Emit(1, out);
      return;
    }
    if (++pending_ones_ >= min_speech) {
      for (std::size_t i = 0; i < pending_ones_; ++i) Emit(1, out);
      pending_ones_ = 0;
      keep_run_ = true;
    }
    return;
  }
  for (std::size_t i = 0; i < pending_ones_; ++i) Emit(0, out);
  pending_ones_ = 0;
  keep_run_ = false;
  Emit(0, out);
}

void StreamState::DropFlush(Labels *out) {
  for (std::size_t i = 0; i < pending_ones_; ++i) Emit(0, out);
  pending_ones_ = 0;
}

void StreamState::Emit(std::uint8_t label, Labels *out) {
  out->push_back(label);
  ++emitted_;
}

}  // namespace sdvad
