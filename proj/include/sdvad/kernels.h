// sdvad/kernels.h

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


#ifndef SDVAD_KERNELS_H_
#define SDVAD_KERNELS_H_

// Data-parallel inner loops.  Every kernel has an OpenMP version used by the
// library and a plain serial version kept as the reference for tests and the
// benchmark.  Parallel reductions accumulate into fixed-size frame chunks and
// combine the chunks in index order, so results do not depend on the thread
// count.

#include "sdvad/common.h"
#include "sdvad/feats.h"
#include "sdvad/speaker.h"

namespace sdvad::kernels {

inline constexpr Eigen::Index kChunkFrames = 512;

/// Log-mel rows for every windowed frame.  Rows are independent, so the two
/// versions are bit-identical.
Matrix LogMelSerial(const MelBank &bank, const Matrix &frames);
Matrix LogMelParallel(const MelBank &bank, const Matrix &frames);

/// Sufficient statistics for one EM pass over a diagonal GMM.
struct GmmAccumulator {
  double loglik = 0.0;
  Vector occupancy;  // C
  Matrix first;      // C x F, sum gamma x
  Matrix second;     // C x F, sum gamma x^2

  GmmAccumulator(int num_components, int dim);
  void Add(const GmmAccumulator &other);
};

/// Precomputed per-component terms for posterior evaluation.
struct GmmEvaluator {
  explicit GmmEvaluator(const DiagGmm &gmm);
  /// Writes responsibilities into `gamma` (size C) and returns log p(x).
  double Posteriors(const double *x, double *gamma) const;

  const DiagGmm &gmm;
  Vector log_consts;
  Matrix inv_vars;
};

GmmAccumulator GmmAccumulateSerial(const DiagGmm &gmm, const Matrix &x);
GmmAccumulator GmmAccumulateParallel(const DiagGmm &gmm, const Matrix &x);

BwStats BwStatsSerial(const DiagGmm &gmm, const Matrix &x);
BwStats BwStatsParallel(const DiagGmm &gmm, const Matrix &x);

}  // namespace sdvad::kernels

#endif  // SDVAD_KERNELS_H_
