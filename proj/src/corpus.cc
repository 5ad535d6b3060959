// src/corpus.cc

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


#include "sdvad/corpus.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace sdvad {

namespace fs = std::filesystem;

namespace {

// Independent stream per (seed, tag, a, b); parallel and serial generation
// draw identical numbers.
std::mt19937_64 Stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t a = 0,
                       std::uint32_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    a, b};
  return std::mt19937_64(seq);
}

enum StreamTag : std::uint32_t { kProfile = 1, kUtterance = 2, kDuration = 3, kConversation = 4 };

double Uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string SpeakerId(int i) {
  std::ostringstream ss;
  ss << "spk" << std::setw(3) << std::setfill('0') << i;
  return ss.str();
}

std::vector<double> LogEnvelope(const std::vector<double> &env) {
  std::vector<double> out(env.size());
  std::transform(env.begin(), env.end(), out.begin(), [](double g) { return std::log(g); });
  return out;
}

// Gains at mel-band centres, interpolated linearly in mel and clamped at the
// edges.
double EnvelopeAt(const std::vector<double> &env, const std::vector<double> &centers_mel,
                  double hz) {
  const double m = HzToMel(hz);
  if (m <= centers_mel.front()) return env.front();
  if (m >= centers_mel.back()) return env.back();
  const auto it = std::upper_bound(centers_mel.begin(), centers_mel.end(), m);
  const std::size_t k = static_cast<std::size_t>(it - centers_mel.begin());
  const double w = (m - centers_mel[k - 1]) / (centers_mel[k] - centers_mel[k - 1]);
  return (1.0 - w) * env[k - 1] + w * env[k];
}

std::vector<double> CentersMel(int n_mels, int sample_rate) {
  const double lo = HzToMel(20.0), hi = HzToMel(sample_rate / 2.0);
  const double step = (hi - lo) / (n_mels + 1);
  std::vector<double> c(n_mels);
  for (int k = 0; k < n_mels; ++k) c[k] = lo + (k + 1) * step;
  return c;
}

std::string Join(const std::vector<std::string> &items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? std::string(1, sep) : "") + items[i];
  return out;
}

}  // namespace

std::vector<SpeakerProfile> MakeProfiles(std::uint64_t seed, int count, const SynthOptions &opts) {
  std::vector<SpeakerProfile> profiles;
  std::vector<std::vector<double>> logs;
  const int n = opts.n_mels;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng = Stream(seed, kProfile, static_cast<std::uint32_t>(i));
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      SpeakerProfile p;
      p.id = SpeakerId(i);
      p.pitch_hz = Uniform(rng, 90.0, 240.0);
      const double tilt = Uniform(rng, -2.5, 0.5);
      std::vector<double> log_env(n);
      double top = -std::numeric_limits<double>::infinity();
      const int bumps = 2;
      double centers[bumps], widths[bumps], amps[bumps];
      for (int j = 0; j < bumps; ++j) {
        centers[j] = Uniform(rng, 0.1 * n, 0.9 * n);
        widths[j] = Uniform(rng, 1.5, 5.0);
        amps[j] = Uniform(rng, 1.0, 2.5);
      }
      for (int k = 0; k < n; ++k) {
        double v = tilt * k / std::max(1, n - 1);
        for (int j = 0; j < bumps; ++j)
          v += amps[j] * std::exp(-0.5 * std::pow((k - centers[j]) / widths[j], 2));
        log_env[k] = v;
        top = std::max(top, v);
      }
      p.envelope.resize(n);
      for (int k = 0; k < n; ++k) p.envelope[k] = std::clamp(std::exp(log_env[k] - top), 0.05, 1.0);
      const auto cand = LogEnvelope(p.envelope);
      placed = std::all_of(logs.begin(), logs.end(), [&](const std::vector<double> &other) {
        double d2 = 0.0;
        for (int k = 0; k < n; ++k) d2 += (cand[k] - other[k]) * (cand[k] - other[k]);
        return std::sqrt(d2) >= opts.min_log_envelope_distance;
      });
      if (placed) {
        logs.push_back(cand);
        profiles.push_back(std::move(p));
      }
    }
    if (!placed)
      throw DataError("could not place speaker " + std::to_string(i) +
                      " at the requested minimum envelope distance");
  }
  return profiles;
}

Labels FrameLabelsFromMask(const std::vector<std::uint8_t> &mask, std::size_t num_frames, int shift) {
  Labels out(num_frames, 0);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::size_t begin = t * shift, end = std::min(mask.size(), begin + shift);
    std::size_t covered = 0;
    for (std::size_t i = begin; i < end; ++i) covered += mask[i] ? 1 : 0;
    out[t] = 2 * covered > static_cast<std::size_t>(shift) ? 1 : 0;
  }
  return out;
}

Utterance SynthUtterance(const SpeakerProfile &profile, double duration_s, double snr_db,
                         std::uint64_t seed, const SynthOptions &opts) {
  if (duration_s < 0.5) throw ConfigError("utterance duration must be >= 0.5 s");
  const int sr = opts.sample_rate;
  std::mt19937_64 rng(seed);
  const auto total = static_cast<std::size_t>(std::lround(duration_s * sr));
  std::vector<double> x(total, 0.0);
  std::vector<std::uint8_t> mask(total, 0);
  const std::vector<double> centers = CentersMel(opts.n_mels, sr);
  const double nyquist = sr / 2.0;

  std::size_t pos = static_cast<std::size_t>(Uniform(rng, 0.2, 0.8) * sr * std::min(1.0, duration_s / 3.0));
  while (pos < total) {
    const std::size_t len = static_cast<std::size_t>(Uniform(rng, 0.3, 1.5) * sr);
    const std::size_t end = std::min(total, pos + len);
    const double f0 = profile.pitch_hz * Uniform(rng, 0.92, 1.08);
    const double rate = Uniform(rng, 3.0, 6.0), mod_phase = Uniform(rng, 0.0, 2 * std::numbers::pi);
    std::vector<std::complex<double>> osc, rot;
    std::vector<double> amp;
    for (int k = 1; k * f0 < 0.95 * nyquist; ++k) {
      const double w = 2 * std::numbers::pi * k * f0 / sr;
      const double phase = Uniform(rng, 0.0, 2 * std::numbers::pi);
      osc.push_back(std::polar(1.0, phase));
      rot.push_back(std::polar(1.0, w));
      amp.push_back(EnvelopeAt(profile.envelope, centers, k * f0));
    }
    const double fade = 0.01 * sr;
    for (std::size_t i = pos; i < end; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < osc.size(); ++k) {
        v += amp[k] * osc[k].imag();
        osc[k] *= rot[k];
      }
      const double local = static_cast<double>(i - pos), remain = static_cast<double>(end - i);
      double g = 1.0 - 0.3 * (0.5 + 0.5 * std::cos(2 * std::numbers::pi * rate * local / sr + mod_phase));
      if (local < fade) g *= 0.5 - 0.5 * std::cos(std::numbers::pi * local / fade);
      if (remain < fade) g *= 0.5 - 0.5 * std::cos(std::numbers::pi * remain / fade);
      x[i] = g * v;
      mask[i] = 1;
      if ((i - pos) % 1024 == 1023)
        for (auto &o : osc) o /= std::abs(o);
    }
    pos = end + static_cast<std::size_t>(Uniform(rng, 0.2, 0.8) * sr);
  }

  double power = 0.0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < total; ++i)
    if (mask[i]) power += x[i] * x[i], ++voiced;
  const double rms = voiced ? std::sqrt(power / voiced) : 0.0;
  const double target_rms = 0.05;
  if (rms > 0)
    for (double &v : x) v *= target_rms / rms;
  if (std::isfinite(snr_db)) {
    std::normal_distribution<double> noise(0.0, target_rms * std::pow(10.0, -snr_db / 20.0));
    for (double &v : x) v += noise(rng);
  }

  Utterance utt;
  utt.speaker = profile.id;
  utt.audio.sample_rate = sr;
  utt.audio.samples = std::move(x);
  const std::size_t frames = NumFrames(total, opts.frames.WindowSamples(sr), opts.frames.ShiftSamples(sr));
  utt.speech = FrameLabelsFromMask(mask, frames, opts.frames.ShiftSamples(sr));
  return utt;
}

Conversation MakeConversation(const Utterance &a, const Utterance &b, const std::string &target) {
  if (a.speaker == b.speaker)
    throw DataError("conversation halves share speaker " + a.speaker);
  if (target != a.speaker && target != b.speaker)
    throw DataError("target " + target + " is neither " + a.speaker + " nor " + b.speaker);
  if (a.audio.sample_rate != b.audio.sample_rate)
    throw DataError("conversation halves have different sample rates");
  Conversation c;
  c.target = target;
  c.other = target == a.speaker ? b.speaker : a.speaker;
  c.audio.sample_rate = a.audio.sample_rate;
  c.audio.samples = a.audio.samples;
  c.audio.samples.insert(c.audio.samples.end(), b.audio.samples.begin(), b.audio.samples.end());
  c.speech = a.speech;
  c.speech.insert(c.speech.end(), b.speech.begin(), b.speech.end());
  c.target_labels = target == a.speaker ? a.speech : Labels(a.speech.size(), 0);
  const Labels tail = target == b.speaker ? b.speech : Labels(b.speech.size(), 0);
  c.target_labels.insert(c.target_labels.end(), tail.begin(), tail.end());
  return c;
}

void BuildDataset(const DatasetConfig &config, const std::string &dir) {
  if (config.n_train < 2 || config.n_dev < 2 || config.n_test < 2)
    throw ConfigError("every split needs at least 2 speakers");
  if (config.enroll_per_speaker < 1 || config.utts_per_speaker <= config.enroll_per_speaker)
    throw ConfigError("need 1 <= enroll_per_speaker < utts_per_speaker");
  const int n_spk = config.n_train + config.n_dev + config.n_test;
  const int per = config.utts_per_speaker;
  fs::create_directories(fs::path(dir) / "wav");
  fs::create_directories(fs::path(dir) / "conv");

  const auto profiles = MakeProfiles(config.seed, n_spk, config.synth);
  auto split_of = [&](int s) {
    return s < config.n_train ? "train" : s < config.n_train + config.n_dev ? "dev" : "test";
  };

  std::vector<Utterance> utts(static_cast<std::size_t>(n_spk) * per);
  const auto n_utts = static_cast<std::ptrdiff_t>(utts.size());
  std::vector<std::string> errors(utts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n_utts; ++k) {
    try {
      const auto s = static_cast<std::uint32_t>(k / per), j = static_cast<std::uint32_t>(k % per);
      auto drng = Stream(config.seed, kDuration, s, j);
      const double dur = std::max(0.5, config.mean_duration_s * Uniform(drng, 0.7, 1.3));
      auto urng = Stream(config.seed, kUtterance, s, j);
      Utterance u = SynthUtterance(profiles[s], dur, config.snr_db, urng(), config.synth);
      std::ostringstream id;
      id << profiles[s].id << "_u" << std::setw(2) << std::setfill('0') << j;
      u.id = id.str();
      QuantizePcm16(&u.audio);
      WriteWav((fs::path(dir) / "wav" / (u.id + ".wav")).string(), u.audio);
      utts[k] = std::move(u);
    } catch (const std::exception &e) {
      errors[k] = e.what();
    }
  }
  for (const auto &e : errors)
    if (!e.empty()) throw DataError(e);

  {
    std::ofstream lst(fs::path(dir) / "utterances.lst");
    std::vector<LabeledSegment> labs;
    for (int s = 0; s < n_spk; ++s)
      for (int j = 0; j < per; ++j) {
        const Utterance &u = utts[s * per + j];
        lst << u.id << ' ' << u.speaker << ' ' << split_of(s) << ' '
            << (j < config.enroll_per_speaker ? "enroll" : "conv") << " wav/" << u.id << ".wav\n";
        for (const auto &seg : ToSegments(u.speech)) labs.push_back({u.id, seg, "speech"});
      }
    WriteSegmentFile((fs::path(dir) / "utterances.lab").string(), labs);
  }

  struct Split {
    const char *name;
    int begin, end;
  };
  const Split splits[] = {{"train", 0, config.n_train},
                          {"dev", config.n_train, config.n_train + config.n_dev},
                          {"test", config.n_train + config.n_dev, n_spk}};
  std::ofstream pairs(fs::path(dir) / "conversations.lst");
  for (const Split &sp : splits) {
    std::vector<ManifestEntry> manifest;
    int conv_index = 0;
    for (int s = sp.begin; s < sp.end; ++s) {
      std::vector<std::string> enroll;
      for (int j = 0; j < config.enroll_per_speaker; ++j) enroll.push_back(utts[s * per + j].id);
      for (int i = config.enroll_per_speaker; i < per; ++i) {
        auto rng = Stream(config.seed, kConversation, static_cast<std::uint32_t>(s),
                          static_cast<std::uint32_t>(i));
        int other = std::uniform_int_distribution<int>(sp.begin, sp.end - 2)(rng);
        if (other >= s) ++other;
        const int j = std::uniform_int_distribution<int>(config.enroll_per_speaker, per - 1)(rng);
        const bool target_first = std::bernoulli_distribution(0.5)(rng);
        const Utterance &tu = utts[s * per + i], &ou = utts[other * per + j];
        Conversation conv = target_first ? MakeConversation(tu, ou, tu.speaker)
                                         : MakeConversation(ou, tu, tu.speaker);
        std::ostringstream id;
        id << sp.name << "_c" << std::setw(4) << std::setfill('0') << conv_index++;
        conv.id = id.str();
        const std::string wav_rel = "conv/" + conv.id + ".wav", lab_rel = "conv/" + conv.id + ".lab";
        WriteWav((fs::path(dir) / wav_rel).string(), conv.audio);
        std::vector<LabeledSegment> labs;
        for (const auto &seg : ToSegments(conv.speech)) labs.push_back({conv.id, seg, "speech"});
        for (const auto &seg : ToSegments(conv.target_labels)) labs.push_back({conv.id, seg, "target"});
        std::stable_sort(labs.begin(), labs.end(), [](const LabeledSegment &a, const LabeledSegment &b) {
          return a.seg.start < b.seg.start;
        });
        WriteSegmentFile((fs::path(dir) / lab_rel).string(), labs);
        manifest.push_back({conv.id, wav_rel, lab_rel, tu.speaker, enroll});
        pairs << conv.id << ' ' << (target_first ? tu.id : ou.id) << ' '
              << (target_first ? ou.id : tu.id) << '\n';
      }
    }
    WriteManifest((fs::path(dir) / (std::string(sp.name) + ".lst")).string(), manifest);
  }
}

std::vector<ManifestEntry> ReadManifest(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ss(line);
    ManifestEntry e;
    std::string enroll, extra;
    if (!(ss >> e.conv_id)) continue;
    if (!(ss >> e.wav_path >> e.label_path >> e.target >> enroll) || (ss >> extra))
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected '<conv-id> <wav> <labels> <target> <enroll-ids>'");
    std::istringstream es(enroll);
    for (std::string id; std::getline(es, id, ',');)
      if (!id.empty()) e.enroll_ids.push_back(id);
    out.push_back(std::move(e));
  }
  return out;
}

void WriteManifest(const std::string &path, const std::vector<ManifestEntry> &entries) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  for (const auto &e : entries)
    os << e.conv_id << ' ' << e.wav_path << ' ' << e.label_path << ' ' << e.target << ' '
       << Join(e.enroll_ids, ',') << '\n';
}

std::map<std::string, std::pair<std::string, std::string>> ReadConversationPairs(
    const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open conversation list " + path);
  std::map<std::string, std::pair<std::string, std::string>> out;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    std::istringstream ss(line);
    std::string id, a, b, extra;
    if (!(ss >> id)) continue;
    if (!(ss >> a >> b) || (ss >> extra))
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected '<conv-id> <utt> <utt>'");
    out[id] = {a, b};
  }
  return out;
}

std::vector<UtteranceEntry> ReadUtteranceList(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open utterance list " + path);
  std::vector<UtteranceEntry> out;
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    std::istringstream ss(line);
    UtteranceEntry e;
    if (!(ss >> e.id)) continue;
    if (!(ss >> e.speaker >> e.split >> e.role >> e.wav_path))
      throw FormatError(path + ":" + std::to_string(lineno) + ": malformed utterance entry");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Utterance> LoadRealCorpus(const std::string &wav_dir, const std::string &label_file,
                                      const FrameOptions &frames, double label_unit_ms) {
  if (!(label_unit_ms > 0)) throw ConfigError("label unit must be positive");
  std::map<std::string, fs::path> wavs;
  if (!fs::is_directory(wav_dir)) throw DataError("not a directory: " + wav_dir);
  for (const auto &entry : fs::directory_iterator(wav_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      wavs[entry.path().stem().string()] = entry.path();

  const auto segments = ReadSegmentFile(label_file);
  std::map<std::string, std::vector<Segment>> by_utt;
  for (const auto &s : segments) {
    if (!wavs.count(s.utt))
      throw DataError("label file " + label_file + " names utterance '" + s.utt +
                      "' but " + wav_dir + " has no audio for it");
    by_utt[s.utt].push_back(s.seg);
  }

  std::vector<Utterance> out;
  for (const auto &[id, path] : wavs) {
    Utterance u;
    u.id = id;
    u.speaker = id.substr(0, id.find('_'));
    u.audio = ReadWav(path.string());
    const int sr = u.audio.sample_rate;
    const std::size_t n = u.audio.samples.size();
    std::vector<std::uint8_t> mask(n, 0);
    for (const Segment &s : by_utt[id]) {
      const auto to_sample = [&](std::size_t v) {
        return std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(v * label_unit_ms * sr / 1000.0)));
      };
      std::fill(mask.begin() + to_sample(s.start), mask.begin() + to_sample(s.end), 1);
    }
    const std::size_t num_frames = NumFrames(n, frames.WindowSamples(sr), frames.ShiftSamples(sr));
    u.speech = FrameLabelsFromMask(mask, num_frames, frames.ShiftSamples(sr));
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace sdvad
