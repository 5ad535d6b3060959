// sdvad/nnet.h

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


#ifndef SDVAD_NNET_H_
#define SDVAD_NNET_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sdvad/common.h"
#include "sdvad/feats.h"
#include "sdvad/speaker.h"

namespace sdvad {

/// Every row t becomes [x_t, embedding].
FeatureMatrix AttachSpeaker(const FeatureMatrix &feats, const Vector &embedding);

/// Fixed affine input normalisation x' = (x - shift) * scale, estimated once
/// from training data and not updated by SGD.
struct InputNorm {
  Vector shift;
  Vector scale;

  int Dim() const { return static_cast<int>(shift.size()); }
  Vector Apply(const double *x) const;
};

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

/// tanh hidden layers and a 2-way softmax output layer.
struct MlpModel {
  InputNorm norm;
  std::vector<DenseLayer> layers;

  int InputDim() const { return norm.Dim(); }
};

/// Gate rows are stacked [input, forget, output, candidate], H rows each.
struct LstmLayer {
  Matrix w;  // 4H x in
  Matrix u;  // 4H x H
  Vector b;  // 4H

  int Hidden() const { return static_cast<int>(u.cols()); }
};

struct LstmModel {
  InputNorm norm;
  std::vector<LstmLayer> layers;
  DenseLayer out;  // 2 x H

  int InputDim() const { return norm.Dim(); }
};

using SequenceModel = std::variant<MlpModel, LstmModel>;

int InputDim(const SequenceModel &model);

/// Uniform(+-1/sqrt(fan_in)) weights; LSTM forget-gate bias 1.0.
MlpModel InitMlp(int input_dim, const std::vector<int> &hidden, std::uint64_t seed);
LstmModel InitLstm(int input_dim, int hidden, int num_layers, std::uint64_t seed);

/// Identity normalisation of the given width.
InputNorm IdentityNorm(int dim);
/// Per-dimension mean / inverse std over all rows of all inputs.  Dimensions
/// with (near) zero spread get scale 1.
InputNorm FitInputNorm(const std::vector<const Matrix *> &inputs);

/// Posterior pair (p_nonspeech, p_speech) for one input row.
std::pair<double, double> MlpForwardRow(const MlpModel &model, std::span<const double> x);
/// T x 2 posteriors, row at a time (the path shared with streaming).
Matrix MlpForward(const MlpModel &model, const Matrix &x);

struct LstmState {
  std::vector<Vector> h;
  std::vector<Vector> c;
};
LstmState InitialState(const LstmModel &model);
/// Advances the recurrence by one frame and returns the posterior pair.
std::pair<double, double> LstmStep(const LstmModel &model, LstmState *state,
                                   std::span<const double> x);
/// T x 2 posteriors from zero initial state; causal by construction.
Matrix LstmForward(const LstmModel &model, const Matrix &x);

Matrix Forward(const SequenceModel &model, const Matrix &x);

/// Mean over frames of -log p(label_t), probabilities clamped to >= 1e-12.
/// `posteriors` is T x 2.
double CrossEntropy(const Matrix &posteriors, const Labels &labels);

/// One training sequence.  For the MLP every row is an independent sample.
struct Sequence {
  Matrix inputs;
  Labels labels;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 8;  // utterances per update
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
};

/// Mean frame cross-entropy over the batch and its exact gradient.  `grad`
/// is resized to the model's shape.  Per-utterance gradients are computed in
/// parallel and summed in batch order.
double LossAndGradient(const MlpModel &model, std::span<const Sequence> batch, MlpModel *grad);
double LossAndGradient(const LstmModel &model, std::span<const Sequence> batch, LstmModel *grad);

/// Trainable tensors as flat views, in serialization order.
std::vector<std::span<double>> Parameters(MlpModel &model);
std::vector<std::span<double>> Parameters(LstmModel &model);
std::size_t NumParameters(const SequenceModel &model);

/// One clipped full-gradient SGD step.  Returns the pre-update mean loss.
/// Throws NumericalError if the loss is not finite.
double TrainStep(MlpModel *model, std::span<const Sequence> batch, const TrainConfig &config);
double TrainStep(LstmModel *model, std::span<const Sequence> batch, const TrainConfig &config);

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;
};

/// Shuffled mini-batch SGD over `data` for config.epochs epochs.
/// `on_epoch` is called after each epoch.
void Train(SequenceModel *model, const std::vector<Sequence> &data, const TrainConfig &config,
           const std::function<void(const EpochReport &)> &on_epoch = {});

/// As above, but epoch e (0-based) trains on `data_for(e)`, which lets the
/// caller present freshly augmented data every epoch.  The reference must
/// stay valid until the next call.
void Train(SequenceModel *model, const std::function<const std::vector<Sequence> &(int)> &data_for,
           const TrainConfig &config, const std::function<void(const EpochReport &)> &on_epoch = {});

/// Max over all parameters of |analytic - numeric| / max(|a|, |n|, 1e-8),
/// with central differences of step eps.
double GradCheck(const SequenceModel &model, std::span<const Sequence> batch, double eps);

/// Rounds every parameter (and the normaliser) to float32, the precision of
/// the model file.
void RoundToFloat(SequenceModel *model);

}  // namespace sdvad

#endif  // SDVAD_NNET_H_
