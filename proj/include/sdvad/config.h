// config.h

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


#ifndef SDVAD_CONFIG_H_
#define SDVAD_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sdvad/corpus.h"
#include "sdvad/feats.h"
#include "sdvad/nnet.h"
#include "sdvad/speaker.h"

namespace sdvad {

/// Classifier front end and post-processing for one detector.
struct DetectorOptions {
  std::string arch = "lstm";  // lstm | mlp
  int hidden = 64;
  int layers = 2;
  int context = 5;            // MLP one-sided context r
  int bin = 1;                // feature binning factor n
  int chunk = 0;              // training sequence length in steps (0 = whole)
  bool flip_targets = true;   // SDVAD: also train with the other speaker as target
  bool select_best = true;    // keep the epoch with the best dev ACC
  double augment = 1.0;       // per-epoch probability of re-colouring each speaker
  double augment_scale = 5.0; // max log-gain amplitude of a re-colouring
  TrainConfig train{.learning_rate = 0.05, .epochs = 20, .batch_size = 1};
};

struct PostOptions {
  double threshold = 0.5;
  int smooth = 1;             // majority window W (1 = off)
  std::size_t min_gap = 0;    // merge: fill gaps shorter than this
  std::size_t min_speech = 0; // merge: drop segments shorter than this
};

/// Every tunable of the engine. Loaded from a key=value file; unknown keys
/// and out-of-range values raise ConfigError.
struct EngineConfig {
  std::string corpus_dir = "corpus";
  std::string exp_dir = "exp";
  int threads = 0;  // 0 = OpenMP default

  DatasetConfig dataset;
  FrameOptions frames;
  int sample_rate = 8000;
  int n_mels = 36;
  int n_ceps = 20;

  UbmOptions ubm{64, 10, 5, 1e-4, 1};
  TvOptions tv{32, 5, 1};

  DetectorOptions vad;    // speaker-independent stage of the baseline
  DetectorOptions sdvad;  // end-to-end detector
  PostOptions vad_post{0.5, 10, 10, 10};
  PostOptions sdvad_post;  // raw output by default
  std::size_t tolerance = 10;

  std::string ubm_path, tv_path, sv_path, vad_path, sdvad_path;

  /// Sets `key` from its textual value.
  void Set(const std::string &key, const std::string &value);
  /// Cross-field checks; call after all Set() calls.
  void Validate() const;
  /// Model path defaults under exp_dir for any path left empty.
  std::string UbmPath() const;
  std::string TvPath() const;
  std::string SvPath() const;
  std::string VadPath() const;
  std::string SdvadPath() const;

  static std::vector<std::string> Keys();
  /// Canonical key=value dump, one per line, in Keys() order.
  std::string Dump() const;
};

/// Parses a key=value file ('#' starts a comment) into `config`.
void LoadConfigFile(const std::string &path, EngineConfig *config);

}  // namespace sdvad

#endif  // SDVAD_CONFIG_H_
