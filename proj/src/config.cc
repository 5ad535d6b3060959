// config.cc

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


#include "sdvad/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace sdvad {

namespace {

std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long ParseInt(const std::string &key, const std::string &v, long long lo, long long hi) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  if (out < lo || out > hi)
    throw ConfigError(key + ": " + v + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return out;
}

double ParseReal(const std::string &key, const std::string &v, double lo, double hi,
                 bool allow_inf = false) {
  double out = 0;
  if (allow_inf && (v == "inf" || v == "+inf")) return std::numeric_limits<double>::infinity();
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  if (out < lo || out > hi)
    throw ConfigError(key + ": " + v + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return out;
}

std::string FormatReal(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Binding {
  std::string key;
  std::function<void(EngineConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const EngineConfig &)> get;
};

template <typename T, typename Get>
Binding IntKey(std::string key, Get get, long long lo, long long hi) {
  return {key,
          [get, lo, hi](EngineConfig &c, const std::string &k, const std::string &v) {
            get(c) = static_cast<T>(ParseInt(k, v, lo, hi));
          },
          [get](const EngineConfig &c) {
            return std::to_string(get(const_cast<EngineConfig &>(c)));
          }};
}

template <typename Get>
Binding RealKey(std::string key, Get get, double lo, double hi, bool allow_inf = false) {
  return {key,
          [get, lo, hi, allow_inf](EngineConfig &c, const std::string &k, const std::string &v) {
            get(c) = ParseReal(k, v, lo, hi, allow_inf);
          },
          [get](const EngineConfig &c) { return FormatReal(get(const_cast<EngineConfig &>(c))); }};
}

template <typename Get>
Binding StrKey(std::string key, Get get) {
  return {key, [get](EngineConfig &c, const std::string &, const std::string &v) { get(c) = v; },
          [get](const EngineConfig &c) { return get(const_cast<EngineConfig &>(c)); }};
}

constexpr long long kBig = 1LL << 40;

void AddDetector(std::vector<Binding> *out, const std::string &p,
                 DetectorOptions EngineConfig::*d, PostOptions EngineConfig::*post) {
  out->push_back({p + ".arch",
                  [d](EngineConfig &c, const std::string &k, const std::string &v) {
                    if (v != "lstm" && v != "mlp")
                      throw ConfigError(k + ": expected lstm or mlp, got '" + v + "'");
                    (c.*d).arch = v;
                  },
                  [d](const EngineConfig &c) { return (c.*d).arch; }});
  out->push_back(IntKey<int>(p + ".hidden", [d](EngineConfig &c) -> int & { return (c.*d).hidden; }, 1, 4096));
  out->push_back(IntKey<int>(p + ".layers", [d](EngineConfig &c) -> int & { return (c.*d).layers; }, 1, 16));
  out->push_back(IntKey<int>(p + ".context", [d](EngineConfig &c) -> int & { return (c.*d).context; }, 0, 100));
  out->push_back(IntKey<int>(p + ".bin", [d](EngineConfig &c) -> int & { return (c.*d).bin; }, 1, 1000));
  out->push_back(IntKey<int>(p + ".chunk", [d](EngineConfig &c) -> int & { return (c.*d).chunk; }, 0, 1 << 30));
  out->push_back(IntKey<bool>(p + ".flip_targets", [d](EngineConfig &c) -> bool & { return (c.*d).flip_targets; }, 0, 1));
  out->push_back(IntKey<bool>(p + ".select_best", [d](EngineConfig &c) -> bool & { return (c.*d).select_best; }, 0, 1));
  out->push_back(RealKey(p + ".augment", [d](EngineConfig &c) -> double & { return (c.*d).augment; }, 0.0, 1.0));
  out->push_back(RealKey(p + ".augment_scale", [d](EngineConfig &c) -> double & { return (c.*d).augment_scale; }, 0.0, 10.0));
  out->push_back(RealKey(p + ".lr", [d](EngineConfig &c) -> double & { return (c.*d).train.learning_rate; }, 1e-12, 100.0));
  out->push_back(IntKey<int>(p + ".epochs", [d](EngineConfig &c) -> int & { return (c.*d).train.epochs; }, 0, 100000));
  out->push_back(IntKey<int>(p + ".batch", [d](EngineConfig &c) -> int & { return (c.*d).train.batch_size; }, 1, 100000));
  out->push_back(RealKey(p + ".clip", [d](EngineConfig &c) -> double & { return (c.*d).train.clip_norm; }, 0.0, 1e12));
  out->push_back(IntKey<std::uint64_t>(p + ".seed", [d](EngineConfig &c) -> std::uint64_t & { return (c.*d).train.seed; }, 0, kBig));
  out->push_back(RealKey(p + ".threshold", [post](EngineConfig &c) -> double & { return (c.*post).threshold; }, 1e-9, 1.0 - 1e-9));
  out->push_back(IntKey<int>(p + ".smooth", [post](EngineConfig &c) -> int & { return (c.*post).smooth; }, 1, 100000));
  out->push_back(IntKey<std::size_t>(p + ".min_gap", [post](EngineConfig &c) -> std::size_t & { return (c.*post).min_gap; }, 0, kBig));
  out->push_back(IntKey<std::size_t>(p + ".min_speech", [post](EngineConfig &c) -> std::size_t & { return (c.*post).min_speech; }, 0, kBig));
}

const std::vector<Binding> &Bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    b.push_back(StrKey("corpus.dir", [](EngineConfig &c) -> std::string & { return c.corpus_dir; }));
    b.push_back(StrKey("exp.dir", [](EngineConfig &c) -> std::string & { return c.exp_dir; }));
    b.push_back(IntKey<int>("threads", [](EngineConfig &c) -> int & { return c.threads; }, 0, 4096));
    b.push_back(IntKey<std::uint64_t>("corpus.seed", [](EngineConfig &c) -> std::uint64_t & { return c.dataset.seed; }, 0, kBig));
    b.push_back(IntKey<int>("corpus.train_speakers", [](EngineConfig &c) -> int & { return c.dataset.n_train; }, 2, 100000));
    b.push_back(IntKey<int>("corpus.dev_speakers", [](EngineConfig &c) -> int & { return c.dataset.n_dev; }, 2, 100000));
    b.push_back(IntKey<int>("corpus.test_speakers", [](EngineConfig &c) -> int & { return c.dataset.n_test; }, 2, 100000));
    b.push_back(IntKey<int>("corpus.utts_per_speaker", [](EngineConfig &c) -> int & { return c.dataset.utts_per_speaker; }, 2, 100000));
    b.push_back(IntKey<int>("corpus.enroll_per_speaker", [](EngineConfig &c) -> int & { return c.dataset.enroll_per_speaker; }, 1, 100000));
    b.push_back(RealKey("corpus.mean_duration", [](EngineConfig &c) -> double & { return c.dataset.mean_duration_s; }, 1.0, 3600.0));
    b.push_back(RealKey("corpus.snr_db", [](EngineConfig &c) -> double & { return c.dataset.snr_db; }, -30.0, 200.0, true));
    b.push_back(RealKey("corpus.min_envelope_distance", [](EngineConfig &c) -> double & { return c.dataset.synth.min_log_envelope_distance; }, 0.0, 100.0));
    b.push_back(IntKey<int>("feats.sample_rate", [](EngineConfig &c) -> int & { return c.sample_rate; }, 1000, 192000));
    b.push_back(RealKey("feats.frame_length_ms", [](EngineConfig &c) -> double & { return c.frames.frame_length_ms; }, 1.0, 1000.0));
    b.push_back(RealKey("feats.frame_shift_ms", [](EngineConfig &c) -> double & { return c.frames.frame_shift_ms; }, 1.0, 1000.0));
    b.push_back(RealKey("feats.preemph", [](EngineConfig &c) -> double & { return c.frames.preemph; }, 0.0, 1.0));
    b.push_back(IntKey<int>("feats.n_mels", [](EngineConfig &c) -> int & { return c.n_mels; }, 2, 512));
    b.push_back(IntKey<int>("feats.n_ceps", [](EngineConfig &c) -> int & { return c.n_ceps; }, 1, 512));
    b.push_back(IntKey<int>("ubm.components", [](EngineConfig &c) -> int & { return c.ubm.num_components; }, 1, 65536));
    b.push_back(IntKey<int>("ubm.iters", [](EngineConfig &c) -> int & { return c.ubm.num_iters; }, 0, 10000));
    b.push_back(IntKey<int>("ubm.kmeans_iters", [](EngineConfig &c) -> int & { return c.ubm.kmeans_iters; }, 0, 10000));
    b.push_back(RealKey("ubm.var_floor", [](EngineConfig &c) -> double & { return c.ubm.var_floor_ratio; }, 1e-12, 1.0));
    b.push_back(IntKey<std::uint64_t>("ubm.seed", [](EngineConfig &c) -> std::uint64_t & { return c.ubm.seed; }, 0, kBig));
    b.push_back(IntKey<int>("tv.dim", [](EngineConfig &c) -> int & { return c.tv.ivector_dim; }, 1, 4096));
    b.push_back(IntKey<int>("tv.iters", [](EngineConfig &c) -> int & { return c.tv.num_iters; }, 0, 10000));
    b.push_back(IntKey<std::uint64_t>("tv.seed", [](EngineConfig &c) -> std::uint64_t & { return c.tv.seed; }, 0, kBig));
    AddDetector(&b, "vad", &EngineConfig::vad, &EngineConfig::vad_post);
    AddDetector(&b, "sdvad", &EngineConfig::sdvad, &EngineConfig::sdvad_post);
    b.push_back(IntKey<std::size_t>("eval.tolerance", [](EngineConfig &c) -> std::size_t & { return c.tolerance; }, 0, kBig));
    b.push_back(StrKey("model.ubm", [](EngineConfig &c) -> std::string & { return c.ubm_path; }));
    b.push_back(StrKey("model.tv", [](EngineConfig &c) -> std::string & { return c.tv_path; }));
    b.push_back(StrKey("model.sv", [](EngineConfig &c) -> std::string & { return c.sv_path; }));
    b.push_back(StrKey("model.vad", [](EngineConfig &c) -> std::string & { return c.vad_path; }));
    b.push_back(StrKey("model.sdvad", [](EngineConfig &c) -> std::string & { return c.sdvad_path; }));
    return b;
  }();
  return table;
}

}  // namespace

void EngineConfig::Set(const std::string &key, const std::string &value) {
  for (const Binding &b : Bindings()) {
    if (b.key == key) {
      b.set(*this, key, Trim(value));
      dataset.synth.sample_rate = sample_rate;
      dataset.synth.n_mels = n_mels;
      dataset.synth.frames = frames;
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

void EngineConfig::Validate() const {
  if (n_ceps > n_mels)
    throw ConfigError("feats.n_ceps (" + std::to_string(n_ceps) + ") exceeds feats.n_mels (" +
                      std::to_string(n_mels) + ")");
  if (dataset.enroll_per_speaker >= dataset.utts_per_speaker)
    throw ConfigError("corpus.enroll_per_speaker must leave at least one conversation utterance");
  if (frames.frame_shift_ms > frames.frame_length_ms)
    throw ConfigError("feats.frame_shift_ms exceeds feats.frame_length_ms");
  if (corpus_dir.empty() || exp_dir.empty()) throw ConfigError("corpus.dir and exp.dir must be set");
}

std::string EngineConfig::UbmPath() const { return ubm_path.empty() ? exp_dir + "/ubm.mdl" : ubm_path; }
std::string EngineConfig::TvPath() const { return tv_path.empty() ? exp_dir + "/tv.mdl" : tv_path; }
std::string EngineConfig::SvPath() const { return sv_path.empty() ? exp_dir + "/plda.mdl" : sv_path; }
std::string EngineConfig::VadPath() const { return vad_path.empty() ? exp_dir + "/vad.mdl" : vad_path; }
std::string EngineConfig::SdvadPath() const {
  return sdvad_path.empty() ? exp_dir + "/sdvad.mdl" : sdvad_path;
}

std::vector<std::string> EngineConfig::Keys() {
  std::vector<std::string> keys;
  for (const Binding &b : Bindings()) keys.push_back(b.key);
  return keys;
}

std::string EngineConfig::Dump() const {
  std::string out;
  for (const Binding &b : Bindings()) out += b.key + "=" + b.get(*this) + "\n";
  return out;
}

void LoadConfigFile(const std::string &path, EngineConfig *config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      config->Set(Trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError &e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace sdvad
