// src/segmenter.cc

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


#include "sdvad/segmenter.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sdvad {

Labels Threshold(std::span<const double> posteriors, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  Labels out(posteriors.size());
  for (std::size_t t = 0; t < posteriors.size(); ++t) out[t] = posteriors[t] >= theta ? 1 : 0;
  return out;
}

int SmoothLookahead(int window) { return window / 2; }

Labels Smooth(const Labels &labels, int window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  const int ahead = SmoothLookahead(window), behind = window - 1 - ahead;
  Labels out(labels.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    int ones = 0;
    for (std::ptrdiff_t j = t - behind; j <= t + ahead; ++j)
      ones += labels[std::clamp<std::ptrdiff_t>(j, 0, n - 1)] ? 1 : 0;
    out[t] = 2 * ones >= window ? 1 : 0;
  }
  return out;
}

Labels MergeSegments(const Labels &labels, std::size_t min_gap, std::size_t min_speech) {
  Labels out = labels;
  SegmentList segs = ToSegments(out);
  for (std::size_t k = 1; k < segs.size(); ++k) {
    const std::size_t gap = segs[k].start - segs[k - 1].end;
    if (gap < min_gap) std::fill(out.begin() + segs[k - 1].end, out.begin() + segs[k].start, 1);
  }
  for (const Segment &s : ToSegments(out))
    if (s.Length() < min_speech) std::fill(out.begin() + s.start, out.begin() + s.end, 0);
  return out;
}

SegmentList ToSegments(const Labels &labels) {
  SegmentList segs;
  for (std::size_t t = 0; t < labels.size();) {
    if (!labels[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < labels.size() && labels[end]) ++end;
    segs.push_back({t, end});
    t = end;
  }
  return segs;
}

Labels FromSegments(const SegmentList &segments, std::size_t total) {
  Labels out(total, 0);
  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const Segment &s = segments[k];
    if (s.start >= s.end || s.end > total || (k > 0 && s.start < prev_end))
      throw ContractError("segment [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                          ") is empty, out of range, or overlaps its predecessor");
    std::fill(out.begin() + s.start, out.begin() + s.end, 1);
    prev_end = s.end;
  }
  return out;
}

std::vector<LabeledSegment> ReadSegmentFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open label file " + path);
  std::vector<LabeledSegment> out;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    LabeledSegment s;
    long long start = 0, end = 0;
    if (!(ss >> s.utt)) continue;
    std::string extra;
    if (!(ss >> start >> end >> s.label) || (ss >> extra) || start < 0 || end <= start ||
        (s.label != "speech" && s.label != "target"))
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected '<utt-id> <start> <end> <speech|target>' with start < end");
    s.seg = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
    out.push_back(std::move(s));
  }
  return out;
}

void WriteSegmentFile(const std::string &path, const std::vector<LabeledSegment> &segments) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  for (const auto &s : segments)
    os << s.utt << ' ' << s.seg.start << ' ' << s.seg.end << ' ' << s.label << '\n';
}

std::map<std::string, SegmentList> SegmentsByUtt(const std::vector<LabeledSegment> &segments,
                                                 const std::string &label) {
  std::map<std::string, SegmentList> out;
  for (const auto &s : segments)
    if (s.label == label) out[s.utt].push_back(s.seg);
  for (auto &[utt, list] : out)
    std::sort(list.begin(), list.end(),
              [](const Segment &a, const Segment &b) { return a.start < b.start; });
  return out;
}

}  // namespace sdvad
