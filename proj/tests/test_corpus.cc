// test_corpus.cc

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


#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <doctest.h>

#include "sdvad/corpus.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::TempDir;

namespace {

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

DatasetConfig TinyDataset(std::uint64_t seed) {
  DatasetConfig c;
  c.n_train = 3;
  c.n_dev = 2;
  c.n_test = 2;
  c.utts_per_speaker = 4;
  c.enroll_per_speaker = 1;
  c.mean_duration_s = 1.0;
  c.seed = seed;
  return c;
}

Vector MeanSpeechLogMel(const Utterance &u) {
  const FeatureMatrix f = ComputeLogMel(u.audio, 36);
  Vector sum = Vector::Zero(36);
  int n = 0;
  for (Eigen::Index t = 0; t < f.NumFrames(); ++t)
    if (u.speech[t]) sum += f.values.row(t).transpose(), ++n;
  REQUIRE(n > 0);
  return sum / n;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("synthetic utterances: labels, determinism, silence") {
  const SynthOptions opts;
  const auto profiles = MakeProfiles(7, 2, opts);
  const Utterance a = SynthUtterance(profiles[0], 3.0, std::numeric_limits<double>::infinity(), 11);
  const Utterance b = SynthUtterance(profiles[0], 3.0, std::numeric_limits<double>::infinity(), 11);
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.speech == b.speech);
  CHECK(a.speech.size() == NumFrames(a.audio.samples.size(), 200, 80));
  int speech = 0, checked = 0;
  for (std::size_t t = 1; t + 1 < a.speech.size(); ++t) {
    speech += a.speech[t];
    if (a.speech[t - 1] || a.speech[t] || a.speech[t + 1]) continue;
    for (std::size_t i = t * 80; i < (t + 1) * 80; ++i) CHECK(a.audio.samples[i] == 0.0);
    ++checked;
  }
  CHECK(speech > 0);
  CHECK(checked > 0);
  CHECK_THROWS_AS(SynthUtterance(profiles[0], 0.4, 20.0, 1), ConfigError);
  const Utterance noisy = SynthUtterance(profiles[0], 3.0, 20.0, 11);
  CHECK(noisy.speech == a.speech);
  CHECK(noisy.audio.samples != a.audio.samples);
}

TEST_CASE("profiles are deterministic and acoustically distinct") {
  const SynthOptions opts;
  const auto p = MakeProfiles(3, 6, opts);
  const auto q = MakeProfiles(3, 6, opts);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i].envelope == q[i].envelope);
    for (double g : p[i].envelope) CHECK((g >= 0.05 && g <= 1.0));
  }
  std::vector<Vector> means;
  for (std::size_t i = 0; i < p.size(); ++i)
    means.push_back(MeanSpeechLogMel(SynthUtterance(p[i], 3.0, 20.0, 100 + i)));
  double closest = 1e300;
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = i + 1; j < means.size(); ++j)
      closest = std::min(closest, (means[i] - means[j]).norm());
  CHECK(closest >= 1.0);
}

TEST_CASE("conversations") {
  const auto p = MakeProfiles(5, 2, {});
  Utterance a = SynthUtterance(p[0], 1.0, 20.0, 1), b = SynthUtterance(p[1], 1.5, 20.0, 2);
  const Conversation ca = MakeConversation(a, b, a.speaker);
  CHECK(ca.target_labels.size() == a.speech.size() + b.speech.size());
  CHECK(std::equal(a.speech.begin(), a.speech.end(), ca.target_labels.begin()));
  CHECK(std::all_of(ca.target_labels.begin() + a.speech.size(), ca.target_labels.end(),
                    [](auto v) { return v == 0; }));
  const Conversation cb = MakeConversation(a, b, b.speaker);
  CHECK(std::all_of(cb.target_labels.begin(), cb.target_labels.begin() + a.speech.size(),
                    [](auto v) { return v == 0; }));
  CHECK(std::equal(b.speech.begin(), b.speech.end(), cb.target_labels.begin() + a.speech.size()));
  for (std::size_t t = 0; t < cb.speech.size(); ++t) CHECK(cb.target_labels[t] <= cb.speech[t]);
  CHECK(ca.audio.samples.size() == a.audio.samples.size() + b.audio.samples.size());
  CHECK_THROWS_AS(MakeConversation(a, a, a.speaker), DataError);
  CHECK_THROWS_AS(MakeConversation(a, b, "nobody"), DataError);
}

TEST_CASE("dataset build: splits, manifests, determinism") {
  TempDir d1("ds1"), d2("ds2");
  BuildDataset(TinyDataset(4), d1.str());
  BuildDataset(TinyDataset(4), d2.str());
  for (const char *f : {"train.lst", "dev.lst", "test.lst", "utterances.lst", "utterances.lab",
                        "conv/dev_c0001.wav", "conv/test_c0002.lab"})
    CHECK(Slurp(d1 / f) == Slurp(d2 / f));

  const auto utts = ReadUtteranceList(d1 / "utterances.lst");
  CHECK(utts.size() == 7 * 4);
  std::map<std::string, std::string> split_of, role_of, speaker_of;
  std::map<std::string, std::set<std::string>> speakers;
  for (const auto &u : utts) {
    if (split_of.count(u.speaker)) CHECK(split_of[u.speaker] == u.split);
    split_of[u.speaker] = u.split;
    role_of[u.id] = u.role;
    speaker_of[u.id] = u.speaker;
    speakers[u.split].insert(u.speaker);
    CHECK(std::filesystem::exists(d1 / u.wav_path));
  }
  CHECK(speakers["train"].size() == 3);
  CHECK(speakers["dev"].size() == 2);
  CHECK(speakers["test"].size() == 2);

  const auto labs = ReadSegmentFile(d1 / "utterances.lab");
  for (const auto &l : labs) CHECK(speaker_of.count(l.utt) == 1);

  for (const char *split : {"train", "dev", "test"}) {
    const auto manifest = ReadManifest(d1 / (std::string(split) + ".lst"));
    CHECK(manifest.size() == speakers[split].size() * 3);
    for (const auto &e : manifest) {
      CHECK(split_of[e.target] == split);
      REQUIRE(e.enroll_ids.size() == 1);
      CHECK(role_of[e.enroll_ids[0]] == "enroll");
      CHECK(speaker_of[e.enroll_ids[0]] == e.target);
      const auto segs = ReadSegmentFile(d1 / e.label_path);
      const auto speech = SegmentsByUtt(segs, "speech")[e.conv_id];
      const auto target = SegmentsByUtt(segs, "target")[e.conv_id];
      CHECK(!target.empty());
      for (std::size_t k = 1; k < segs.size(); ++k) CHECK(segs[k - 1].seg.start <= segs[k].seg.start);
      const AudioSignal audio = ReadWav(d1 / e.wav_path);
      const std::size_t n = NumFrames(audio.samples.size(), 200, 80);
      const Labels sp = FromSegments(speech, n), tg = FromSegments(target, n);
      for (std::size_t t = 0; t < n; ++t) CHECK(tg[t] <= sp[t]);
    }
  }
  // Round trip of the manifest format.
  const auto m = ReadManifest(d1 / "test.lst");
  WriteManifest(d1 / "copy.lst", m);
  CHECK(Slurp(d1 / "copy.lst") == Slurp(d1 / "test.lst"));

  DatasetConfig bad = TinyDataset(4);
  bad.enroll_per_speaker = 4;
  CHECK_THROWS_AS(BuildDataset(bad, d1 / "bad"), ConfigError);
  bad = TinyDataset(4);
  bad.n_dev = 1;
  CHECK_THROWS_AS(BuildDataset(bad, d1 / "bad"), ConfigError);
}

TEST_CASE("real-corpus adapter") {
  TempDir dir("real");
  std::filesystem::create_directories(dir / "wav");
  AudioSignal sig;
  sig.samples.assign(12000, 0.0);  // 1.5 s
  WriteWav(dir / "wav/spkA_u1.wav", sig);
  WriteWav(dir / "wav/spkB_u1.wav", sig);
  std::ofstream(dir / "a.lab") << "spkA_u1 0 100 speech\n";
  const auto utts = LoadRealCorpus(dir / "wav", dir / "a.lab");
  REQUIRE(utts.size() == 2);
  CHECK(utts[0].id == "spkA_u1");
  CHECK(utts[0].speaker == "spkA");
  REQUIRE(utts[0].speech.size() == NumFrames(12000, 200, 80));
  for (std::size_t t = 0; t < utts[0].speech.size(); ++t) CHECK(utts[0].speech[t] == (t < 100));
  for (auto v : utts[1].speech) CHECK(v == 0);

  std::ofstream(dir / "empty.lab") << "";
  for (const auto &u : LoadRealCorpus(dir / "wav", dir / "empty.lab"))
    for (auto v : u.speech) CHECK(v == 0);

  // Millisecond labels placing boundaries inside frames; compare with a
  // per-sample count over each frame's 80-sample hop.
  std::ofstream(dir / "ms.lab") << "spkA_u1 101 214 speech\nspkA_u1 300 345 speech\n"
                                   "spkA_u1 400 405 speech\n";
  const auto ms = LoadRealCorpus(dir / "wav", dir / "ms.lab", {}, 1.0);
  std::vector<int> speech_sample(12000, 0);
  for (auto [s, e] : std::vector<std::pair<int, int>>{{101, 214}, {300, 345}, {400, 405}})
    for (int i = s * 8; i < e * 8; ++i) speech_sample[i] = 1;
  for (std::size_t t = 0; t < ms[0].speech.size(); ++t) {
    int count = 0;
    for (std::size_t i = t * 80; i < t * 80 + 80; ++i) count += speech_sample[i];
    CHECK(ms[0].speech[t] == (count > 40 ? 1 : 0));
  }
  CHECK(ms[0].speech[10] == 1);  // 101 ms: 72 of 80 samples
  CHECK(ms[0].speech[21] == 0);  // 214 ms: 32 of 80 samples
  CHECK(ms[0].speech[34] == 0);  // 345 ms: exactly half is not a majority

  std::ofstream(dir / "bad.lab") << "spkZ_u9 0 10 speech\n";
  try {
    LoadRealCorpus(dir / "wav", dir / "bad.lab");
    FAIL("expected DataError");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("spkZ_u9") != std::string::npos);
  }
}

}  // TEST_SUITE
