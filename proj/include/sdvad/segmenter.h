// sdvad/segmenter.h

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


#ifndef SDVAD_SEGMENTER_H_
#define SDVAD_SEGMENTER_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sdvad/common.h"

namespace sdvad {

/// Half-open frame range [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t Length() const { return end - start; }
  bool operator==(const Segment &) const = default;
};

/// Sorted, non-overlapping, non-adjacent segments.
using SegmentList = std::vector<Segment>;

/// 1 iff p >= theta.  theta must lie in (0, 1).
Labels Threshold(std::span<const double> posteriors, double theta = 0.5);

/// Frames of look-ahead used by a centred window of width W: floor(W / 2).
/// The window covers [t - (W - 1 - floor(W/2)), t + floor(W/2)].
int SmoothLookahead(int window);

/// Centred majority vote over a W-frame window with edge replication.  Ties
/// (possible for even W) resolve to 1.
Labels Smooth(const Labels &labels, int window);

/// Fills non-speech gaps shorter than min_gap that sit between two speech
/// runs, then removes speech runs shorter than min_speech.
Labels MergeSegments(const Labels &labels, std::size_t min_gap, std::size_t min_speech);

SegmentList ToSegments(const Labels &labels);
/// ContractError on unsorted, overlapping or out-of-range segments.
Labels FromSegments(const SegmentList &segments, std::size_t total);

/// One line of a segment label file.
struct LabeledSegment {
  std::string utt;
  Segment seg;
  std::string label;  // "speech" or "target"
};

/// `<utt-id> <start-frame> <end-frame> <label>` per line, '#' comments.
std::vector<LabeledSegment> ReadSegmentFile(const std::string &path);
void WriteSegmentFile(const std::string &path, const std::vector<LabeledSegment> &segments);

/// Groups the segments of one label kind by utterance.
std::map<std::string, SegmentList> SegmentsByUtt(const std::vector<LabeledSegment> &segments,
                                                 const std::string &label);

}  // namespace sdvad

#endif  // SDVAD_SEGMENTER_H_
