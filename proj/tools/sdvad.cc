// sdvad.cc

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


// Command-line driver: corpus synthesis, training recipes, inference,
// the two-stage baseline and evaluation.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "sdvad/config.h"
#include "sdvad/pipeline.h"

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<int> threads;
};

sdvad::EngineConfig BuildConfig(const Common &common) {
  sdvad::EngineConfig config;
  if (!common.config_file.empty()) sdvad::LoadConfigFile(common.config_file, &config);
  for (const auto &kv : common.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sdvad::ConfigError("--set expects key=value, got '" + kv + "'");
    config.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.threads) config.Set("threads", std::to_string(*common.threads));
  return config;
}

void Finalize(const sdvad::EngineConfig &config) {
  config.Validate();
  if (config.threads > 0) omp_set_num_threads(config.threads);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"sdvad: speaker-dependent voice activity detection engine"};
  app.require_subcommand(1);
  app.fallthrough();  // global options are accepted after the subcommand too
  Common common;
  app.add_option("-c,--config", common.config_file, "key=value configuration file");
  app.add_option("-s,--set", common.sets, "override one configuration key (key=value), repeatable");
  app.add_option("-j,--threads", common.threads, "worker threads (0 = all cores)");

  // Per-subcommand flags that map onto configuration keys.
  std::vector<std::pair<std::string, std::string>> flag_sets;
  auto key_flag = [&](CLI::App *sub, const std::string &flag, const std::string &key,
                      const std::string &help) {
    sub->add_option_function<std::string>(
        flag, [&flag_sets, key](const std::string &v) { flag_sets.emplace_back(key, v); }, help);
  };

  auto *synth = app.add_subcommand("synth-corpus", "generate the synthetic conversational corpus");
  key_flag(synth, "--out", "corpus.dir", "corpus directory");
  key_flag(synth, "--seed", "corpus.seed", "corpus seed");

  auto *ubm = app.add_subcommand("train-ubm", "train the diagonal GMM universal background model");
  key_flag(ubm, "--components", "ubm.components", "mixture components");
  auto *tv = app.add_subcommand("train-tv", "train the total variability matrix");
  key_flag(tv, "--dim", "tv.dim", "i-vector dimension");
  auto *plda = app.add_subcommand("train-plda", "train PLDA and calibrate the verification threshold");

  auto *vad = app.add_subcommand("train-vad", "train the speaker-independent VAD of the baseline");
  key_flag(vad, "--arch", "vad.arch", "lstm | mlp");
  key_flag(vad, "--bin", "vad.bin", "feature binning factor");
  key_flag(vad, "--epochs", "vad.epochs", "training epochs");
  key_flag(vad, "--model", "model.vad", "output model path");

  auto *sd = app.add_subcommand("train-sdvad", "train the end-to-end speaker-dependent detector");
  key_flag(sd, "--arch", "sdvad.arch", "lstm | mlp");
  key_flag(sd, "--bin", "sdvad.bin", "feature binning factor");
  key_flag(sd, "--epochs", "sdvad.epochs", "training epochs");
  key_flag(sd, "--model", "model.sdvad", "output model path");

  sdvad::InferRequest infer_req;
  std::string merge;
  auto *infer = app.add_subcommand("infer", "run the speaker-dependent detector over a manifest");
  infer->add_option("--manifest", infer_req.manifest, "conversation manifest (default: test split)");
  infer->add_option("-o,--out", infer_req.output, "hypothesis segment file")->required();
  infer->add_flag("--stream", infer_req.stream, "frame-by-frame streaming inference");
  infer->add_option("--bin", infer_req.bin_override, "expected binning factor (must match the model)")
      ->check(CLI::PositiveNumber);
  key_flag(infer, "--smooth", "sdvad.smooth", "majority smoothing window W");
  infer->add_option("--merge", merge, "MIN_GAP,MIN_SPEECH segment merging");
  key_flag(infer, "--threshold", "sdvad.threshold", "decision threshold");
  key_flag(infer, "--model", "model.sdvad", "model path");

  sdvad::InferRequest base_req;
  auto *baseline = app.add_subcommand("baseline", "run the two-stage VAD + verification baseline");
  baseline->add_option("--manifest", base_req.manifest, "conversation manifest (default: test split)");
  baseline->add_option("-o,--out", base_req.output, "hypothesis segment file")->required();

  std::string eval_manifest, eval_out;
  std::vector<std::string> hyps;
  auto *eval = app.add_subcommand("eval", "score hypothesis files; writes a JSON report");
  eval->add_option("--manifest", eval_manifest, "conversation manifest (default: test split)");
  eval->add_option("--hyp", hyps, "NAME=FILE hypothesis segment file, repeatable")->required();
  eval->add_option("-o,--out", eval_out, "JSON report path")->required();
  key_flag(eval, "--tolerance", "eval.tolerance", "boundary tolerance in frames");

  app.add_subcommand("dump-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    sdvad::EngineConfig config = BuildConfig(common);
    for (const auto &[k, v] : flag_sets) config.Set(k, v);
    if (!merge.empty()) {
      const auto comma = merge.find(',');
      if (comma == std::string::npos) throw sdvad::ConfigError("--merge expects MIN_GAP,MIN_SPEECH");
      config.Set("sdvad.min_gap", merge.substr(0, comma));
      config.Set("sdvad.min_speech", merge.substr(comma + 1));
    }
    Finalize(config);

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth-corpus") sdvad::RunSynthCorpus(config);
    else if (name == "train-ubm") sdvad::RunTrainUbm(config);
    else if (name == "train-tv") sdvad::RunTrainTv(config);
    else if (name == "train-plda") sdvad::RunTrainPlda(config);
    else if (name == "train-vad") sdvad::RunTrainVad(config);
    else if (name == "train-sdvad") sdvad::RunTrainSdvad(config);
    else if (name == "infer") sdvad::RunInfer(config, infer_req);
    else if (name == "baseline") sdvad::RunBaseline(config, base_req);
    else if (name == "eval") {
      std::vector<std::pair<std::string, std::string>> systems;
      for (const auto &h : hyps) {
        const auto eq = h.find('=');
        if (eq == std::string::npos || eq == 0)
          throw sdvad::ConfigError("--hyp expects NAME=FILE, got '" + h + "'");
        systems.emplace_back(h.substr(0, eq), h.substr(eq + 1));
      }
      sdvad::RunEval(config, eval_manifest, systems, eval_out);
    } else if (name == "dump-config") {
      std::cout << config.Dump();
    }
  } catch (const sdvad::Error &e) {
    std::cerr << "ERROR (sdvad) " << e.what() << '\n';
    return sdvad::ExitCode(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "ERROR (sdvad) " << e.what() << '\n';
    return 1;
  }
  return 0;
}
