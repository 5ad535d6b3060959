// sdvad/metrics.h

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


#ifndef SDVAD_METRICS_H_
#define SDVAD_METRICS_H_

#include <cstdint>

#include "sdvad/common.h"
#include "sdvad/segmenter.h"

namespace sdvad {

/// Frame-level confusion counts; class 1 is target speech.
struct FrameScores {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double acc = 0, precision = 0, recall = 0, f1 = 0;

  /// Recomputes the ratios from the counts.
  void Finalize();
  void Add(const FrameScores &other);
};

FrameScores ComputeFrameScores(const Labels &ref, const Labels &hyp);

enum class BoundaryKind { kStart, kEnd };

/// Count of reference boundaries matched one-to-one to hypothesis boundaries
/// of the same kind within +-tol frames, maximised over all matchings.
std::size_t MatchBoundaries(const SegmentList &ref, const SegmentList &hyp, std::size_t tol,
                            BoundaryKind which);

/// Matched fraction of reference boundaries; 1 when the reference is empty.
double BoundaryAccuracy(const SegmentList &ref, const SegmentList &hyp, std::size_t tol,
                        BoundaryKind which);

/// min(N_ref, N_hyp) / max(N_ref, N_hyp); 1 when both are empty.
double BorderPrecision(const SegmentList &ref, const SegmentList &hyp);

/// 4 / (1/a + 1/b + 1/c + 1/d), or 0 if any term is 0.
double HarmonicMean4(double a, double b, double c, double d);

struct JvadReport {
  double sba = 0, eba = 0, bp = 0, acc = 0, jvad = 0;
};

JvadReport ComputeJvad(const Labels &ref, const Labels &hyp, std::size_t tol);

/// Pooled corpus statistics.  Frame counts are pooled; SBA/EBA pool matched
/// and reference boundary counts; BP pools per-utterance min and max segment
/// counts.
struct PooledScores {
  FrameScores frames;
  std::size_t ref_boundaries = 0;
  std::size_t matched_starts = 0;
  std::size_t matched_ends = 0;
  std::size_t seg_min = 0;
  std::size_t seg_max = 0;
  std::size_t utterances = 0;

  void Add(const Labels &ref, const Labels &hyp, std::size_t tol);
  JvadReport Jvad() const;
};

}  // namespace sdvad

#endif  // SDVAD_METRICS_H_
