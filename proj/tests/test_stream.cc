// test_stream.cc

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


#include <random>

#include <doctest.h>

#include "sdvad/stream.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::RandomMatrix;
using sdvad::testing::RandomVector;

namespace {

constexpr int kDim = 5;
constexpr int kEmb = 3;

// A random detector whose posteriors cross 0.5 often enough to exercise
// smoothing and merging.
Detector RandomDetector(std::mt19937_64 &rng, bool lstm, int bin, int context, int smooth,
                        std::size_t min_gap, std::size_t min_speech) {
  Detector d;
  d.meta = {bin, lstm ? 0 : context, kEmb};
  d.embedding = RandomVector(rng, kEmb);
  const int in = kDim * (2 * d.Context() + 1) + kEmb;
  if (lstm) {
    LstmModel m = InitLstm(in, 4, 1 + static_cast<int>(rng() % 2), rng());
    m.out.w *= 6.0;
    d.model = m;
  } else {
    MlpModel m = InitMlp(in, {6}, rng());
    m.layers.back().w *= 6.0;
    d.model = m;
  }
  d.post = {0.5, smooth, min_gap, min_speech};
  return d;
}

Labels Streamed(const Detector &d, const Matrix &feats, bool check_latency) {
  StreamState s(d, static_cast<int>(feats.cols()));
  Labels out;
  for (Eigen::Index t = 0; t < feats.rows(); ++t) {
    s.Push({feats.row(t).data(), static_cast<std::size_t>(feats.cols())}, &out);
    CHECK(out.size() == s.Emitted());
    CHECK(s.Emitted() <= s.Consumed());
    const std::size_t bound = static_cast<std::size_t>(d.Latency()) +
                              (check_latency ? 0 : d.MaxMergeDelay());
    CHECK(s.Consumed() - s.Emitted() <= bound);
  }
  s.Finish(&out);
  CHECK(s.Emitted() == s.Consumed());
  return out;
}

}  // namespace

TEST_SUITE("stream") {

TEST_CASE("latency values") {
  std::mt19937_64 rng(1);
  CHECK(RandomDetector(rng, true, 1, 0, 1, 0, 0).Latency() == 0);
  CHECK(RandomDetector(rng, true, 4, 0, 1, 0, 0).Latency() == 3);
  CHECK(RandomDetector(rng, true, 1, 0, 10, 0, 0).Latency() == 5);
  CHECK(RandomDetector(rng, true, 4, 0, 10, 0, 0).Latency() == 8);
  CHECK(RandomDetector(rng, false, 4, 2, 1, 0, 0).Latency() == 3 + 8);
  CHECK(RandomDetector(rng, true, 1, 0, 1, 10, 10).MaxMergeDelay() == 20);
}

TEST_CASE("one label per frame without binning or smoothing") {
  std::mt19937_64 rng(2);
  const Detector d = RandomDetector(rng, true, 1, 0, 1, 0, 0);
  StreamState s(d, kDim);
  const Matrix x = RandomMatrix(rng, 20, kDim);
  Labels out;
  for (int t = 0; t < 20; ++t) {
    s.Push({x.row(t).data(), kDim}, &out);
    CHECK(out.size() == static_cast<std::size_t>(t + 1));
  }
  CHECK(out == d.Detect(x));
}

TEST_CASE("binning emits n labels after every n-th frame") {
  std::mt19937_64 rng(3);
  const Detector d = RandomDetector(rng, true, 4, 0, 1, 0, 0);
  StreamState s(d, kDim);
  const Matrix x = RandomMatrix(rng, 10, kDim);
  Labels out;
  for (int t = 0; t < 10; ++t) {
    s.Push({x.row(t).data(), kDim}, &out);
    CHECK(out.size() == static_cast<std::size_t>((t + 1) / 4 * 4));
  }
  s.Finish(&out);
  CHECK(out.size() == 10);
  CHECK(out == d.Detect(x));
}

TEST_CASE("streaming equals batch for 50 utterances per (n, W)") {
  std::mt19937_64 rng(4);
  int mismatches = 0, cases = 0;
  for (int n : {1, 4})
    for (int w : {1, 10})
      for (int u = 0; u < 50; ++u) {
        const bool lstm = u % 2 == 0;
        const Detector d = RandomDetector(rng, lstm, n, 1 + u % 3, w, 0, 0);
        const Matrix x = RandomMatrix(rng, 1 + static_cast<Eigen::Index>(rng() % 90), kDim);
        mismatches += Streamed(d, x, true) != d.Detect(x);
        ++cases;
      }
  CHECK(cases == 200);
  CHECK(mismatches == 0);
}

TEST_CASE("streaming equals batch with segment merging") {
  std::mt19937_64 rng(5);
  int mismatches = 0;
  for (int u = 0; u < 200; ++u) {
    const Detector d = RandomDetector(rng, u % 2 == 0, 1 + 3 * (u % 2), 1, 1 + static_cast<int>(rng() % 10),
                                      rng() % 12, rng() % 12);
    const Matrix x = RandomMatrix(rng, 1 + static_cast<Eigen::Index>(rng() % 120), kDim);
    mismatches += Streamed(d, x, false) != d.Detect(x);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("empty streams and dimension mismatches") {
  std::mt19937_64 rng(6);
  const Detector d = RandomDetector(rng, false, 4, 2, 10, 3, 3);
  StreamState s(d, kDim);
  Labels out;
  s.Finish(&out);
  CHECK(out.empty());
  CHECK_THROWS_AS(StreamState(d, kDim + 1), ContractError);
  Detector no_emb = d;
  no_emb.embedding = Vector();
  CHECK_THROWS_AS(StreamState(no_emb, kDim), ContractError);
  StreamState t(d, kDim);
  const std::vector<double> wrong(kDim - 1, 0.0);
  CHECK_THROWS_AS(t.Push(wrong, &out), ContractError);
}

}  // TEST_SUITE
