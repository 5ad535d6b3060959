// sdvad/speaker.h

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


#ifndef SDVAD_SPEAKER_H_
#define SDVAD_SPEAKER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sdvad/common.h"
#include "sdvad/feats.h"

namespace sdvad {

/// Diagonal-covariance GMM used as the universal background model.
struct DiagGmm {
  Vector weights;  // C
  Matrix means;    // C x F
  Matrix vars;     // C x F

  int NumComponents() const { return static_cast<int>(weights.size()); }
  int Dim() const { return static_cast<int>(means.cols()); }
  /// Per-component log(w_c) - 0.5 * (F log 2pi + sum log var).
  Vector LogConsts() const;
  /// Total log-likelihood of all rows of `x`.
  double LogLikelihood(const Matrix &x) const;
};

struct UbmOptions {
  int num_components = 64;
  int num_iters = 20;
  int kmeans_iters = 5;
  double var_floor_ratio = 1e-4;  // of the global per-dim variance
  std::uint64_t seed = 1;
};

/// EM from a seeded k-means initialisation.  If `loglik_trace` is non-null it
/// receives the total log-likelihood evaluated at the start of every
/// iteration followed by the final model's, num_iters + 1 values.
DiagGmm TrainUbm(const std::vector<FeatureMatrix> &features, const UbmOptions &opts,
                 std::vector<double> *loglik_trace = nullptr);

/// Zeroth and centered first-order Baum-Welch statistics of one utterance.
struct BwStats {
  Vector occupancy;  // C
  Matrix first;      // C x F, sum_t gamma_tc (x_t - mu_c)

  BwStats() = default;
  BwStats(int num_components, int dim)
      : occupancy(Vector::Zero(num_components)), first(Matrix::Zero(num_components, dim)) {}
  double TotalOccupancy() const { return occupancy.sum(); }
  void Add(const BwStats &other);
  void Scale(double factor);
};

BwStats ComputeBwStats(const Matrix &feats, const DiagGmm &ubm);

/// Total-variability matrix of M = m + T w, stored as one F x d block per
/// UBM component.
struct TvMatrix {
  std::vector<Matrix> blocks;

  int IvectorDim() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].cols()); }
  int NumComponents() const { return static_cast<int>(blocks.size()); }
};

struct TvOptions {
  int ivector_dim = 32;
  int num_iters = 10;
  std::uint64_t seed = 1;
};

/// EM for the factor-analysis model.  `objective_trace`, if given, receives
/// the log-likelihood (up to a T-independent constant) of all stats under the
/// model before each iteration and after the last one.
TvMatrix TrainTv(const std::vector<BwStats> &stats, const DiagGmm &ubm, const TvOptions &opts,
                 std::vector<double> *objective_trace = nullptr);

/// Log-likelihood of the stats under the current T, up to a T-independent
/// constant: sum over utterances of 0.5 b'L^-1 b - 0.5 log|L|.
double TvObjective(const std::vector<BwStats> &stats, const DiagGmm &ubm, const TvMatrix &tv);

struct IVector {
  Vector values;
  bool normalized = false;
};

/// Precomputes T_c' Sigma_c^-1 T_c so that extraction is a d x d solve.
/// Immutable and shareable once built.
class IvectorExtractor {
 public:
  IvectorExtractor(const DiagGmm &ubm, const TvMatrix &tv);

  int Dim() const { return dim_; }
  /// Posterior mean of w; also returns the posterior precision L if asked.
  IVector Extract(const BwStats &stats, Matrix *precision = nullptr) const;

 private:
  int dim_;
  std::vector<Matrix> t_sinv_;    // per component: d x F, T_c' Sigma_c^-1
  std::vector<Matrix> t_sinv_t_;  // per component: d x d
};

IVector ExtractIvector(const BwStats &stats, const TvMatrix &tv, const DiagGmm &ubm);

/// Scales to unit Euclidean norm.  Throws NumericalError on the zero vector.
IVector LengthNormalize(const IVector &ivec);

/// Inner product of the normalised vectors, in [-1, 1].
double CosineScore(const IVector &a, const IVector &b);

/// Two-covariance PLDA: x = mu + y + e, y ~ N(0, B), e ~ N(0, W).
struct PldaModel {
  Vector mean;
  Matrix between;
  Matrix within;

  int Dim() const { return static_cast<int>(mean.size()); }
};

PldaModel TrainPlda(const std::vector<IVector> &ivecs, const std::vector<std::string> &speakers);

/// Closed-form same/different speaker log-likelihood ratio.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model);
  double Score(const Vector &enroll, const Vector &test) const;

 private:
  Vector mean_;
  Matrix q_;  // self term
  Matrix p_;  // cross term
  double offset_ = 0.0;
};

double PldaScore(const PldaModel &model, const IVector &enroll, const IVector &test);

/// Threshold at the equal-error-rate point between target and non-target
/// trial scores (midpoint between the scores where miss and false-alarm
/// rates cross).  `eer` receives the rate at that point.
double EerThreshold(std::vector<double> target, std::vector<double> nontarget,
                    double *eer = nullptr);

}  // namespace sdvad

#endif  // SDVAD_SPEAKER_H_
