// pipeline.h

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


#ifndef SDVAD_PIPELINE_H_
#define SDVAD_PIPELINE_H_

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdvad/config.h"
#include "sdvad/corpus.h"
#include "sdvad/feats.h"
#include "sdvad/segmenter.h"
#include "sdvad/serialize.h"
#include "sdvad/speaker.h"
#include "sdvad/stream.h"

namespace sdvad {

/// The single feature front end shared by every path: log-mel for the
/// frame classifiers, MFCC (DCT of the same log-mel) for the speaker side.
class FrontEnd {
 public:
  explicit FrontEnd(const EngineConfig &config);

  Matrix LogMel(const AudioSignal &audio) const;
  Matrix Mfcc(const Matrix &logmel) const;
  int NumMels() const { return bank_.NumMels(); }
  int SampleRate() const { return sample_rate_; }
  const FrameOptions &Frames() const { return frames_; }
  std::size_t NumFramesFor(std::size_t num_samples) const;

  /// Incremental framing: feed samples in any block sizes, receive one
  /// log-mel row per complete frame, identical to LogMel() rows.
  class Online {
   public:
    explicit Online(const FrontEnd &front) : front_(front) {}
    void Accept(std::span<const double> samples,
                const std::function<void(std::span<const double>)> &on_frame);

   private:
    const FrontEnd &front_;
    std::vector<double> buffer_;
    std::vector<double> frame_, row_;
  };

 private:
  FrameOptions frames_;
  int sample_rate_;
  int n_ceps_;
  int window_, shift_;
  MelBank bank_;
};

/// UBM + TV + PLDA with its calibrated threshold.
struct SpeakerBackend {
  DiagGmm ubm;
  TvMatrix tv;
  SvBackend sv;
  std::unique_ptr<IvectorExtractor> extractor;
  std::unique_ptr<PldaScorer> scorer;

  SpeakerBackend(DiagGmm u, TvMatrix t, SvBackend s);
  /// Length-normalised i-vector of the selected rows (all rows if `rows` is empty).
  Vector Embed(const Matrix &mfcc, const SegmentList &rows = {}) const;
  Vector EmbedStats(const BwStats &stats) const;
};

/// Corpus directory contents as produced by synth-corpus.
struct CorpusIndex {
  std::string dir;
  std::vector<UtteranceEntry> utterances;
  std::map<std::string, SegmentList> speech;  // per utterance
  std::map<std::string, std::size_t> by_id;

  static CorpusIndex Load(const std::string &dir);
  std::string Path(const std::string &rel) const;
  const UtteranceEntry &Get(const std::string &id) const;
  std::vector<ManifestEntry> Manifest(const std::string &split) const;
};

/// One conversation loaded with features and references.
struct LoadedConversation {
  ManifestEntry entry;
  Matrix logmel;
  Labels speech;
  Labels target;
};

LoadedConversation LoadConversation(const FrontEnd &front, const std::string &base_dir,
                                    const ManifestEntry &entry);
/// Loads every entry in parallel; order follows `entries`.
std::vector<LoadedConversation> LoadConversations(const FrontEnd &front,
                                                  const std::string &base_dir,
                                                  const std::vector<ManifestEntry> &entries);

/// Enrollment embedding: statistics pooled over the speech frames of all
/// enrollment utterances. Throws DataError if there are none.
Vector EnrollmentEmbedding(const FrontEnd &front, const SpeakerBackend &backend,
                           const CorpusIndex &corpus, const std::vector<std::string> &enroll_ids);

/// Two-stage baseline on one conversation: VAD segments, each kept only if
/// its PLDA score against the enrollment reaches the calibrated threshold.
Labels BaselineDetect(const Detector &vad, const SpeakerBackend &backend, const Matrix &logmel,
                      const Matrix &mfcc, const Vector &enrollment);
/// The verification stage alone: zeroes every segment of `labels` whose
/// PLDA score against the enrollment is below the calibrated threshold.
Labels VerifySegments(Labels labels, const SpeakerBackend &backend, const Matrix &mfcc,
                      const Vector &enrollment);

/// Runs a detector frame by frame over raw audio.
Labels StreamDetect(const FrontEnd &front, const Detector &detector, const AudioSignal &audio,
                    std::size_t block_samples = 160);

/// Per-utterance and pooled scores of hypothesis segment files against the
/// manifest references; `systems` maps a system name to its hypothesis file.
nlohmann::ordered_json EvaluateSystems(const FrontEnd &front, const std::string &base_dir,
                                       const std::vector<ManifestEntry> &manifest,
                                       const std::vector<std::pair<std::string, std::string>> &systems,
                                       std::size_t tolerance);

/// Recipes behind the CLI subcommands. Each reads/writes the files named by
/// the configuration.
void RunSynthCorpus(const EngineConfig &config);
void RunTrainUbm(const EngineConfig &config);
void RunTrainTv(const EngineConfig &config);
void RunTrainPlda(const EngineConfig &config);
void RunTrainVad(const EngineConfig &config);
void RunTrainSdvad(const EngineConfig &config);

struct InferRequest {
  std::string manifest;  // path; default: <corpus>/test.lst
  std::string output;    // hypothesis segment file
  bool stream = false;
  int bin_override = 0;  // > 0: must match the model's binning
};
void RunInfer(const EngineConfig &config, const InferRequest &request);
void RunBaseline(const EngineConfig &config, const InferRequest &request);
void RunEval(const EngineConfig &config, const std::string &manifest,
             const std::vector<std::pair<std::string, std::string>> &systems,
             const std::string &report_path);

}  // namespace sdvad

#endif  // SDVAD_PIPELINE_H_
