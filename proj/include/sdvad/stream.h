// stream.h

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


#ifndef SDVAD_STREAM_H_
#define SDVAD_STREAM_H_

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "sdvad/common.h"
#include "sdvad/config.h"
#include "sdvad/feats.h"
#include "sdvad/nnet.h"
#include "sdvad/serialize.h"

namespace sdvad {

/// A frozen frame classifier together with the way its inputs are built
/// (binning, context, appended speaker embedding) and its post-processing.
/// Shared read-only by any number of StreamState objects.
struct Detector {
  SequenceModel model;
  FrontEndMeta meta;
  Vector embedding;  // empty for a speaker-independent detector
  PostOptions post;

  /// Throws ContractError if the model input width does not match
  /// feature_dim under `meta` and the embedding.
  void CheckDims(int feature_dim) const;
  /// Offline path: class-1 posterior per (binned) classifier step.
  std::vector<double> Posteriors(const Matrix &feats) const;
  /// Offline path: final per-frame labels for a whole utterance.
  Labels Detect(const Matrix &feats) const;
  /// Frames between consuming a frame and emitting its label, excluding
  /// the data-dependent delay of segment merging.
  int Latency() const;
  /// One-sided context (in binned steps) actually used by the model.
  int Context() const;
  /// Upper bound on the extra delay segment merging can add.
  std::size_t MaxMergeDelay() const;
};

/// Online counterpart of Detector::Detect. Push() consumes one feature
/// frame and appends whatever labels became final; Finish() flushes the
/// tail. The concatenated output equals Detect() on the same frames.
class StreamState {
 public:
  StreamState(const Detector &detector, int feature_dim);

  void Push(std::span<const double> frame, Labels *out);
  void Finish(Labels *out);

  std::size_t Consumed() const { return consumed_; }
  std::size_t Emitted() const { return emitted_; }

 private:
  void CloseBin(Labels *out);
  void ClassifyReady(bool final, Labels *out);
  void Classify(std::span<const double> input, std::size_t count, Labels *out);
  void SmoothPush(std::uint8_t label, Labels *out);
  void SmoothFlush(Labels *out);
  void FillPush(std::uint8_t label, Labels *out);
  void FillFlush(Labels *out);
  void DropPush(std::uint8_t label, Labels *out);
  void DropFlush(Labels *out);
  void Emit(std::uint8_t label, Labels *out);

  const Detector &det_;
  int dim_;
  bool finished_ = false;
  std::size_t consumed_ = 0, emitted_ = 0;

  // Binning accumulator.
  std::vector<double> bin_sum_;
  int bin_count_ = 0;

  // Binned rows awaiting classification (MLP context needs look-ahead).
  std::deque<std::vector<double>> rows_;  // rows_[0] is binned step row_base_
  std::deque<int> row_counts_;            // frames per binned step
  std::size_t row_base_ = 0;
  std::size_t next_step_ = 0;             // next binned step to classify
  LstmState lstm_;
  std::vector<double> input_;

  // Smoothing: raw frame labels; smooth_[0] is frame smooth_base_.
  std::deque<std::uint8_t> smooth_;
  std::size_t smooth_base_ = 0, smooth_next_ = 0, raw_count_ = 0;
  std::uint8_t first_raw_ = 0;

  // Merging: gap filling then short-segment removal.
  bool seen_speech_ = false, gap_decided_ = false, keep_run_ = false;
  std::size_t pending_zeros_ = 0, pending_ones_ = 0;
};

}  // namespace sdvad

#endif  // SDVAD_STREAM_H_
