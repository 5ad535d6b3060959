// sdvad/corpus.h

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


#ifndef SDVAD_CORPUS_H_
#define SDVAD_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdvad/audio.h"
#include "sdvad/common.h"
#include "sdvad/feats.h"
#include "sdvad/segmenter.h"

namespace sdvad {

/// A synthetic voice: per-mel-band spectral gains and a base pitch.
struct SpeakerProfile {
  std::string id;
  std::vector<double> envelope;  // n_mels gains in [0.05, 1]
  double pitch_hz = 120.0;
};

struct SynthOptions {
  int sample_rate = 8000;
  int n_mels = 36;
  FrameOptions frames;
  /// Minimum L2 distance between the log-envelopes of any two profiles.
  double min_log_envelope_distance = 3.0;
};

/// Profiles spk000 .. spk{count-1}.  Profile i is drawn from a stream keyed
/// by (seed, i) and redrawn until it is at least the minimum distance from
/// profiles 0..i-1, so it depends only on the seed and its index.
std::vector<SpeakerProfile> MakeProfiles(std::uint64_t seed, int count, const SynthOptions &opts);

struct Utterance {
  std::string id;
  std::string speaker;
  AudioSignal audio;
  Labels speech;  // one label per feature frame
};

/// Frame t is speech iff more than half of the samples in
/// [t * shift, (t + 1) * shift) are marked in `mask`.
Labels FrameLabelsFromMask(const std::vector<std::uint8_t> &mask, std::size_t num_frames, int shift);

/// Voiced bursts (0.3-1.5 s) separated by silences (0.2-0.8 s), plus white
/// noise at snr_db relative to the voiced power.  snr_db = +inf disables the
/// noise.  Labels are exact by construction.
Utterance SynthUtterance(const SpeakerProfile &profile, double duration_s, double snr_db,
                         std::uint64_t seed, const SynthOptions &opts = {});

struct Conversation {
  std::string id;
  AudioSignal audio;
  std::string target;
  std::string other;
  Labels speech;  // all speech
  Labels target_labels;  // speech of the target only
};

/// Concatenates a then b.  DataError if both share a speaker or the target is
/// neither of them.
Conversation MakeConversation(const Utterance &a, const Utterance &b, const std::string &target);

struct DatasetConfig {
  int n_train = 20;
  int n_dev = 4;
  int n_test = 8;
  int utts_per_speaker = 10;
  int enroll_per_speaker = 3;
  double mean_duration_s = 6.0;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  SynthOptions synth;
};

/// One manifest line.
struct ManifestEntry {
  std::string conv_id;
  std::string wav_path;    // relative to the corpus directory
  std::string label_path;  // relative to the corpus directory
  std::string target;
  std::vector<std::string> enroll_ids;
};

/// Row of utterances.lst: every single-speaker utterance in the corpus.
struct UtteranceEntry {
  std::string id;
  std::string speaker;
  std::string split;  // train | dev | test
  std::string role;   // enroll | conv
  std::string wav_path;
};

/// Writes the corpus under `dir`:
///   wav/<utt>.wav, utterances.lst, utterances.lab  (single-speaker audio)
///   conv/<conv>.wav, conv/<conv>.lab               (conversations)
///   train.lst, dev.lst, test.lst                   (manifests)
///   conversations.lst                              (source utterances)
/// Output is a pure function of the config.
void BuildDataset(const DatasetConfig &config, const std::string &dir);

/// `<conv-id> <wav-path> <label-path> <target-speaker> <enroll,ids>`.
std::vector<ManifestEntry> ReadManifest(const std::string &path);
void WriteManifest(const std::string &path, const std::vector<ManifestEntry> &entries);
std::vector<UtteranceEntry> ReadUtteranceList(const std::string &path);

/// conversations.lst: `<conv-id> <first-utt> <second-utt>`, the two
/// utterances concatenated (in audio order) to form each conversation.
std::map<std::string, std::pair<std::string, std::string>> ReadConversationPairs(
    const std::string &path);

/// Every *.wav under wav_dir, labelled from a segment file whose start/end
/// values are in units of label_unit_ms.  A frame is speech iff more than half
/// of its shift span is covered.  DataError names any labelled utt-id with no
/// audio.
std::vector<Utterance> LoadRealCorpus(const std::string &wav_dir, const std::string &label_file,
                                      const FrameOptions &frames = {}, double label_unit_ms = 10.0);

}  // namespace sdvad

#endif  // SDVAD_CORPUS_H_
