// src/metrics.cc

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


#include "sdvad/metrics.h"

#include <algorithm>

namespace sdvad {

void FrameScores::Finalize() {
  const double total = static_cast<double>(tp + fp + tn + fn);
  acc = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  f1 = tp > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

void FrameScores::Add(const FrameScores &other) {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  Finalize();
}

FrameScores ComputeFrameScores(const Labels &ref, const Labels &hyp) {
  if (ref.size() != hyp.size())
    throw ContractError("frame scores: reference has " + std::to_string(ref.size()) +
                        " frames, hypothesis " + std::to_string(hyp.size()));
  if (ref.empty()) throw ContractError("frame scores: empty label sequences");
  FrameScores s;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (ref[t] && hyp[t]) ++s.tp;
    else if (!ref[t] && hyp[t]) ++s.fp;
    else if (ref[t]) ++s.fn;
    else ++s.tn;
  }
  s.Finalize();
  return s;
}

namespace {

std::vector<std::size_t> Boundaries(const SegmentList &segs, BoundaryKind which) {
  std::vector<std::size_t> out;
  out.reserve(segs.size());
  for (const auto &s : segs) out.push_back(which == BoundaryKind::kStart ? s.start : s.end);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::size_t MatchBoundaries(const SegmentList &ref, const SegmentList &hyp, std::size_t tol,
                            BoundaryKind which) {
  // Every reference point owns the window [r - tol, r + tol]; windows share a
  // width, so taking references in order and giving each the leftmost free
  // hypothesis inside its window yields a maximum matching.
  const auto r = Boundaries(ref, which), h = Boundaries(hyp, which);
  std::size_t matched = 0, j = 0;
  for (std::size_t b : r) {
    const std::size_t lo = b >= tol ? b - tol : 0;
    while (j < h.size() && h[j] < lo) ++j;
    if (j < h.size() && h[j] <= b + tol) {
      ++matched;
      ++j;
    }
  }
  return matched;
}

double BoundaryAccuracy(const SegmentList &ref, const SegmentList &hyp, std::size_t tol,
                        BoundaryKind which) {
  if (ref.empty()) return 1.0;
  return static_cast<double>(MatchBoundaries(ref, hyp, tol, which)) /
         static_cast<double>(ref.size());
}

double BorderPrecision(const SegmentList &ref, const SegmentList &hyp) {
  const std::size_t lo = std::min(ref.size(), hyp.size()), hi = std::max(ref.size(), hyp.size());
  if (hi == 0) return 1.0;
  return static_cast<double>(lo) / static_cast<double>(hi);
}

double HarmonicMean4(double a, double b, double c, double d) {
  if (a <= 0 || b <= 0 || c <= 0 || d <= 0) return 0.0;
  return 4.0 / (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
}

JvadReport ComputeJvad(const Labels &ref, const Labels &hyp, std::size_t tol) {
  PooledScores pooled;
  pooled.Add(ref, hyp, tol);
  return pooled.Jvad();
}

void PooledScores::Add(const Labels &ref, const Labels &hyp, std::size_t tol) {
  frames.Add(ComputeFrameScores(ref, hyp));
  const SegmentList rs = ToSegments(ref), hs = ToSegments(hyp);
  ref_boundaries += rs.size();
  matched_starts += MatchBoundaries(rs, hs, tol, BoundaryKind::kStart);
  matched_ends += MatchBoundaries(rs, hs, tol, BoundaryKind::kEnd);
  seg_min += std::min(rs.size(), hs.size());
  seg_max += std::max(rs.size(), hs.size());
  ++utterances;
}

JvadReport PooledScores::Jvad() const {
  JvadReport r;
  r.acc = frames.acc;
  r.sba = ref_boundaries ? static_cast<double>(matched_starts) / static_cast<double>(ref_boundaries) : 1.0;
  r.eba = ref_boundaries ? static_cast<double>(matched_ends) / static_cast<double>(ref_boundaries) : 1.0;
  r.bp = seg_max ? static_cast<double>(seg_min) / static_cast<double>(seg_max) : 1.0;
  r.jvad = HarmonicMean4(r.sba, r.eba, r.bp, r.acc);
  return r;
}

}  // namespace sdvad
