// pipeline.cc

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


#include "sdvad/pipeline.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "sdvad/kernels.h"
#include "sdvad/metrics.h"

namespace sdvad {

namespace fs = std::filesystem;

namespace {

void Log(const std::string &msg) { std::cerr << "LOG (sdvad) " << msg << '\n'; }

std::string Fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void RequireFile(const std::string &path, const std::string &stage) {
  if (!fs::exists(path))
    throw DataError("missing " + path + "; run `sdvad " + stage + "` first");
}

void EnsureParent(const std::string &path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// Runs body(i) for i in [0, n) in parallel, rethrowing the first failure
// (lowest index) after the loop.
template <typename Body>
void ParallelFor(std::size_t n, Body body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

Labels ClippedLabels(const SegmentList &segments, std::size_t total) {
  SegmentList clipped;
  for (Segment s : segments) {
    s.end = std::min(s.end, total);
    if (s.start < s.end) clipped.push_back(s);
  }
  return FromSegments(clipped, total);
}

Matrix SelectRows(const Matrix &x, const Labels &mask) {
  const auto n = std::count(mask.begin(), mask.end(), 1);
  Matrix out(n, x.cols());
  Eigen::Index k = 0;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) out.row(k++) = x.row(static_cast<Eigen::Index>(t));
  return out;
}

struct UttFeatures {
  Matrix mfcc;
  Labels speech;
};

UttFeatures LoadUtterance(const FrontEnd &front, const CorpusIndex &corpus,
                          const UtteranceEntry &entry) {
  const Matrix logmel = front.LogMel(ReadWav(corpus.Path(entry.wav_path)));
  UttFeatures out;
  out.mfcc = front.Mfcc(logmel);
  const auto it = corpus.speech.find(entry.id);
  out.speech = ClippedLabels(it == corpus.speech.end() ? SegmentList{} : it->second,
                             static_cast<std::size_t>(logmel.rows()));
  return out;
}

std::vector<const UtteranceEntry *> TrainUtterances(const CorpusIndex &corpus) {
  std::vector<const UtteranceEntry *> out;
  for (const auto &u : corpus.utterances)
    if (u.split == "train") out.push_back(&u);
  if (out.empty()) throw DataError("corpus " + corpus.dir + " has no training utterances");
  return out;
}

std::vector<UttFeatures> LoadTrainUtterances(const FrontEnd &front, const CorpusIndex &corpus) {
  const auto entries = TrainUtterances(corpus);
  std::vector<UttFeatures> feats(entries.size());
  ParallelFor(entries.size(), [&](std::size_t i) { feats[i] = LoadUtterance(front, corpus, *entries[i]); });
  return feats;
}

SpeakerBackend LoadBackend(const EngineConfig &config, bool with_sv) {
  RequireFile(config.UbmPath(), "train-ubm");
  RequireFile(config.TvPath(), "train-tv");
  SvBackend sv;
  if (with_sv) {
    RequireFile(config.SvPath(), "train-plda");
    sv = LoadSv(config.SvPath());
  }
  return SpeakerBackend(LoadUbm(config.UbmPath()), LoadTv(config.TvPath()), std::move(sv));
}

std::string BaseDir(const std::string &manifest) {
  const fs::path parent = fs::path(manifest).parent_path();
  return parent.empty() ? "." : parent.string();
}

std::string DefaultManifest(const EngineConfig &config, const std::string &given,
                            const std::string &split) {
  return given.empty() ? (fs::path(config.corpus_dir) / (split + ".lst")).string() : given;
}

// Enrollment embeddings per target speaker, computed once each.
std::map<std::string, Vector> EnrollmentTable(const FrontEnd &front, const SpeakerBackend &backend,
                                              const CorpusIndex &corpus,
                                              const std::vector<ManifestEntry> &entries) {
  std::map<std::string, std::vector<std::string>> wanted;
  for (const auto &e : entries) {
    if (e.enroll_ids.empty())
      throw DataError("conversation " + e.conv_id + " lists no enrollment utterances");
    wanted.emplace(e.target, e.enroll_ids);
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> jobs(wanted.begin(), wanted.end());
  std::vector<Vector> vecs(jobs.size());
  ParallelFor(jobs.size(), [&](std::size_t i) {
    vecs[i] = EnrollmentEmbedding(front, backend, corpus, jobs[i].second);
  });
  std::map<std::string, Vector> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) out[jobs[i].first] = vecs[i];
  return out;
}

void WriteHypotheses(const std::string &path, const std::vector<ManifestEntry> &entries,
                     const std::vector<Labels> &labels) {
  std::vector<LabeledSegment> segs;
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (const Segment &s : ToSegments(labels[i])) segs.push_back({entries[i].conv_id, s, "target"});
  EnsureParent(path);
  WriteSegmentFile(path, segs);
}

struct DetectorData {
  std::vector<Sequence> train;
  std::vector<LoadedConversation> dev;
  std::map<std::string, Vector> dev_embeddings;
};

Matrix DetectorInput(const Matrix &logmel, int bin, int context, const Vector &embedding) {
  FeatureMatrix x;
  x.values = logmel;
  if (bin > 1) x = BinFeatures(x, bin);
  if (context > 0) x = ContextWindow(x, context);
  if (embedding.size() > 0) x = AttachSpeaker(x, embedding);
  return x.values;
}

// Trains a speaker-independent (speaker == false) or speaker-conditioned
// detector on the training conversations and writes it with its log.
void TrainDetector(const EngineConfig &config, const DetectorOptions &opts, bool speaker,
                   const std::string &model_path) {
  const FrontEnd front(config);
  const std::string base = config.corpus_dir;
  RequireFile((fs::path(base) / "train.lst").string(), "synth-corpus");
  const CorpusIndex corpus = CorpusIndex::Load(base);
  const auto train_entries = corpus.Manifest("train");
  const auto dev_entries = corpus.Manifest("dev");
  const bool mlp = opts.arch == "mlp";
  const int context = mlp ? opts.context : 0;

  std::unique_ptr<SpeakerBackend> backend;
  std::map<std::string, Vector> train_emb, dev_emb;
  if (speaker) {
    backend = std::make_unique<SpeakerBackend>(LoadBackend(config, false));
    train_emb = EnrollmentTable(front, *backend, corpus, train_entries);
    dev_emb = EnrollmentTable(front, *backend, corpus, dev_entries);
  }
  const auto train_convs = LoadConversations(front, base, train_entries);
  const auto dev_convs = LoadConversations(front, base, dev_entries);
  Log("training " + std::string(speaker ? "SDVAD" : "VAD") + " " + opts.arch + " on " +
      std::to_string(train_convs.size()) + " conversations");

  // With flip_targets every training conversation is also presented with
  // its other speaker as the target: same audio, complementary labels, so
  // only the speaker embedding can tell the two apart.
  std::map<std::string, std::pair<std::string, std::string>> pairs;
  const bool flip = speaker && opts.flip_targets;
  if (flip) {
    const std::string path = (fs::path(base) / "conversations.lst").string();
    RequireFile(path, "synth-corpus");
    pairs = ReadConversationPairs(path);
  }
  // A presentation is one conversation seen with one target: its labels
  // and the frames spoken by each of the two speakers.
  struct Presentation {
    const LoadedConversation *conv;
    std::string target;  // empty for the speaker-independent detector
    Labels labels, mine, theirs;
  };
  std::vector<Presentation> shows;
  for (const auto &c : train_convs) {
    Labels other_frames(c.speech.size());
    for (std::size_t t = 0; t < other_frames.size(); ++t) other_frames[t] = c.speech[t] && !c.target[t];
    shows.push_back({&c, speaker ? c.entry.target : "", speaker ? c.target : c.speech, c.target, other_frames});
    if (!flip) continue;
    const auto it = pairs.find(c.entry.conv_id);
    if (it == pairs.end())
      throw DataError("conversations.lst has no entry for " + c.entry.conv_id);
    const std::string &a = corpus.Get(it->second.first).speaker;
    const std::string &b = corpus.Get(it->second.second).speaker;
    const std::string &other = a == c.entry.target ? b : a;
    if (other == c.entry.target || !train_emb.count(other))
      throw DataError("cannot resolve the second speaker of " + c.entry.conv_id);
    shows.push_back({&c, other, other_frames, other_frames, c.target});
  }
  if (shows.empty()) throw DataError("no training sequences");

  // Speaker augmentation re-colours each speaker's speech with a random
  // smooth gain curve; a re-coloured target gets the i-vector of its
  // equally re-coloured enrollment audio, so it acts as a new speaker.
  const bool augment = opts.augment > 0.0;
  struct EnrollAudio {
    Matrix logmel;
    Labels speech;
  };
  std::map<std::string, std::vector<EnrollAudio>> enroll_audio;
  if (augment && speaker) {
    std::map<std::string, std::vector<std::string>> ids;
    for (const auto &e : train_entries) ids.emplace(e.target, e.enroll_ids);
    std::vector<std::pair<std::string, std::string>> jobs;
    for (const auto &[spk, list] : ids)
      for (const auto &id : list) jobs.emplace_back(spk, id);
    std::vector<EnrollAudio> loaded(jobs.size());
    ParallelFor(jobs.size(), [&](std::size_t i) {
      const UtteranceEntry &u = corpus.Get(jobs[i].second);
      loaded[i].logmel = front.LogMel(ReadWav(corpus.Path(u.wav_path)));
      const auto it = corpus.speech.find(u.id);
      loaded[i].speech = ClippedLabels(it == corpus.speech.end() ? SegmentList{} : it->second,
                                       static_cast<std::size_t>(loaded[i].logmel.rows()));
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) enroll_audio[jobs[i].first].push_back(std::move(loaded[i]));
  }
  auto recoloured_embedding = [&](const std::string &spk, const Vector &log_gain) {
    BwStats total(backend->ubm.NumComponents(), backend->ubm.Dim());
    for (const auto &e : enroll_audio.at(spk)) {
      const Matrix mfcc = front.Mfcc(RecolourSpeech(e.logmel, e.speech, e.speech, log_gain));
      total.Add(ComputeBwStats(SelectRows(mfcc, e.speech), backend->ubm));
    }
    if (total.TotalOccupancy() <= 0.0) throw DataError("enrollment of " + spk + " holds no speech frames");
    return backend->EmbedStats(total);
  };

  auto build = [&](std::optional<std::uint64_t> augment_seed) {
    struct Draw {
      bool mine = false, theirs = false;
      Vector mine_gain, theirs_gain;
    };
    std::vector<Draw> draws(shows.size());
    if (augment_seed) {
      std::mt19937_64 rng(*augment_seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (auto &d : draws) {
        d.mine = unit(rng) < opts.augment;
        d.mine_gain = RandomLogGain(front.NumMels(), opts.augment_scale, &rng);
        d.theirs = unit(rng) < opts.augment;
        d.theirs_gain = RandomLogGain(front.NumMels(), opts.augment_scale, &rng);
      }
    }
    std::vector<std::vector<Sequence>> parts(shows.size());
    ParallelFor(shows.size(), [&](std::size_t i) {
      const Presentation &p = shows[i];
      const Draw &d = draws[i];
      Matrix logmel = p.conv->logmel;
      if (d.mine) logmel = RecolourSpeech(logmel, p.conv->speech, p.mine, d.mine_gain);
      if (d.theirs) logmel = RecolourSpeech(logmel, p.conv->speech, p.theirs, d.theirs_gain);
      Vector emb;
      if (speaker) emb = d.mine ? recoloured_embedding(p.target, d.mine_gain) : train_emb.at(p.target);
      Sequence full{DetectorInput(logmel, opts.bin, context, emb), BinLabels(p.labels, opts.bin)};
      const auto steps = full.inputs.rows();
      const Eigen::Index chunk = opts.chunk > 0 ? opts.chunk : steps;
      for (Eigen::Index s = 0; s < steps; s += chunk) {
        const Eigen::Index len = std::min(chunk, steps - s);
        parts[i].push_back({full.inputs.middleRows(s, len),
                            Labels(full.labels.begin() + s, full.labels.begin() + s + len)});
      }
    });
    std::vector<Sequence> out;
    for (auto &part : parts)
      for (auto &seq : part) out.push_back(std::move(seq));
    return out;
  };
  const std::vector<Sequence> data = build(std::nullopt);
  std::vector<Sequence> epoch_data;
  auto data_for = [&](int epoch) -> const std::vector<Sequence> & {
    if (!augment) return data;
    epoch_data = build(opts.train.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) + 1);
    return epoch_data;
  };
  std::vector<const Matrix *> inputs;
  for (const auto &s : data) inputs.push_back(&s.inputs);
  const int in_dim = static_cast<int>(data[0].inputs.cols());

  SequenceModel model;
  if (mlp) {
    MlpModel m = InitMlp(in_dim, std::vector<int>(opts.layers, opts.hidden), opts.train.seed);
    m.norm = FitInputNorm(inputs);
    model = std::move(m);
  } else {
    LstmModel m = InitLstm(in_dim, opts.hidden, opts.layers, opts.train.seed);
    m.norm = FitInputNorm(inputs);
    model = std::move(m);
  }
  const FrontEndMeta meta{opts.bin, context, speaker ? config.tv.ivector_dim : 0};
  if (speaker && backend->tv.IvectorDim() != meta.embedding_dim)
    throw ConfigError("tv.dim=" + std::to_string(meta.embedding_dim) + " but " + config.TvPath() +
                      " holds " + std::to_string(backend->tv.IvectorDim()) + "-dim i-vectors");

  std::ostringstream log;
  log << "# epoch mean_loss dev_acc\n";
  const PostOptions raw;
  auto dev_acc = [&](const SequenceModel &m) {
    std::vector<FrameScores> scores(dev_convs.size());
    ParallelFor(dev_convs.size(), [&](std::size_t i) {
      const auto &c = dev_convs[i];
      Detector det{m, meta, speaker ? dev_emb.at(c.entry.target) : Vector(), raw};
      scores[i] = ComputeFrameScores(speaker ? c.target : c.speech, det.Detect(c.logmel));
    });
    FrameScores total;
    for (const auto &s : scores) total.Add(s);
    total.Finalize();
    return total.acc;
  };
  SequenceModel best = model;
  double best_acc = -1.0;
  int best_epoch = 0;
  Train(&model, data_for, opts.train, [&](const EpochReport &r) {
    const double acc = dev_convs.empty() ? 0.0 : dev_acc(model);
    log << r.epoch << ' ' << Fixed(r.mean_loss, 6) << ' ' << Fixed(acc, 6) << '\n';
    Log("epoch " + std::to_string(r.epoch) + " loss " + Fixed(r.mean_loss, 6) + " dev ACC " +
        Fixed(acc));
    if (acc > best_acc) best = model, best_acc = acc, best_epoch = r.epoch;
  });
  if (opts.select_best && best_epoch > 0 && !dev_convs.empty()) {
    model = std::move(best);
    log << "# selected epoch " << best_epoch << '\n';
    Log("keeping epoch " + std::to_string(best_epoch) + " (dev ACC " + Fixed(best_acc) + ")");
  }
  RoundToFloat(&model);
  EnsureParent(model_path);
  SaveModel(model_path, model, meta);
  std::ofstream(model_path + ".log") << log.str();
  Log("wrote " + model_path);
}

Detector LoadDetector(const std::string &path, const std::string &stage, const PostOptions &post) {
  RequireFile(path, stage);
  Detector det;
  det.model = LoadModel(path, &det.meta);
  det.post = post;
  return det;
}

}  // namespace

// ---------------------------------------------------------------- FrontEnd

FrontEnd::FrontEnd(const EngineConfig &config)
    : frames_(config.frames),
      sample_rate_(config.sample_rate),
      n_ceps_(config.n_ceps),
      window_(config.frames.WindowSamples(config.sample_rate)),
      shift_(config.frames.ShiftSamples(config.sample_rate)),
      bank_(config.n_mels, config.sample_rate, config.frames.WindowSamples(config.sample_rate)) {
  if (n_ceps_ > config.n_mels) throw ConfigError("feats.n_ceps exceeds feats.n_mels");
}

Matrix FrontEnd::LogMel(const AudioSignal &audio) const {
  if (audio.sample_rate != sample_rate_)
    throw DataError("audio sampled at " + std::to_string(audio.sample_rate) + " Hz, expected " +
                    std::to_string(sample_rate_));
  return kernels::LogMelParallel(bank_, FrameSignal(audio, frames_));
}

Matrix FrontEnd::Mfcc(const Matrix &logmel) const {
  FeatureMatrix f;
  f.values = logmel;
  return sdvad::Mfcc(f, n_ceps_).values;
}

std::size_t FrontEnd::NumFramesFor(std::size_t num_samples) const {
  return NumFrames(num_samples, window_, shift_);
}

void FrontEnd::Online::Accept(std::span<const double> samples,
                              const std::function<void(std::span<const double>)> &on_frame) {
  buffer_.insert(buffer_.end(), samples.begin(), samples.end());
  const auto win = static_cast<std::size_t>(front_.window_);
  const auto hop = static_cast<std::size_t>(front_.shift_);
  std::size_t pos = 0;
  frame_.resize(win);
  row_.resize(static_cast<std::size_t>(front_.bank_.NumMels()));
  while (buffer_.size() - pos >= win) {
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(pos), win, frame_.begin());
    PreprocessFrame(frame_, front_.frames_.preemph);
    front_.bank_.Compute(frame_, row_);
    on_frame(row_);
    pos += hop;
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
}

// ---------------------------------------------------------- SpeakerBackend

SpeakerBackend::SpeakerBackend(DiagGmm u, TvMatrix t, SvBackend s)
    : ubm(std::move(u)), tv(std::move(t)), sv(std::move(s)) {
  extractor = std::make_unique<IvectorExtractor>(ubm, tv);
  if (sv.plda.Dim() > 0) {
    if (sv.plda.Dim() != tv.IvectorDim())
      throw ContractError("PLDA dimension " + std::to_string(sv.plda.Dim()) +
                          " does not match i-vector dimension " + std::to_string(tv.IvectorDim()));
    scorer = std::make_unique<PldaScorer>(sv.plda);
  }
}

Vector SpeakerBackend::EmbedStats(const BwStats &stats) const {
  return LengthNormalize(extractor->Extract(stats)).values;
}

Vector SpeakerBackend::Embed(const Matrix &mfcc, const SegmentList &rows) const {
  if (rows.empty()) return EmbedStats(ComputeBwStats(mfcc, ubm));
  BwStats total(ubm.NumComponents(), ubm.Dim());
  for (const Segment &s : rows)
    total.Add(ComputeBwStats(mfcc.middleRows(static_cast<Eigen::Index>(s.start),
                                             static_cast<Eigen::Index>(s.Length())),
                             ubm));
  return EmbedStats(total);
}

// ------------------------------------------------------------- CorpusIndex

CorpusIndex CorpusIndex::Load(const std::string &dir) {
  CorpusIndex c;
  c.dir = dir;
  const std::string lst = (fs::path(dir) / "utterances.lst").string();
  const std::string lab = (fs::path(dir) / "utterances.lab").string();
  RequireFile(lst, "synth-corpus");
  c.utterances = ReadUtteranceList(lst);
  for (std::size_t i = 0; i < c.utterances.size(); ++i) c.by_id[c.utterances[i].id] = i;
  if (fs::exists(lab)) c.speech = SegmentsByUtt(ReadSegmentFile(lab), "speech");
  return c;
}

std::string CorpusIndex::Path(const std::string &rel) const {
  const fs::path p(rel);
  return p.is_absolute() ? rel : (fs::path(dir) / p).string();
}

const UtteranceEntry &CorpusIndex::Get(const std::string &id) const {
  const auto it = by_id.find(id);
  if (it == by_id.end()) throw DataError("utterance '" + id + "' is not listed in " + dir + "/utterances.lst");
  return utterances[it->second];
}

std::vector<ManifestEntry> CorpusIndex::Manifest(const std::string &split) const {
  const std::string path = (fs::path(dir) / (split + ".lst")).string();
  RequireFile(path, "synth-corpus");
  return ReadManifest(path);
}

// ------------------------------------------------------------ conversations

LoadedConversation LoadConversation(const FrontEnd &front, const std::string &base_dir,
                                    const ManifestEntry &entry) {
  LoadedConversation c;
  c.entry = entry;
  const fs::path wav = fs::path(entry.wav_path).is_absolute() ? fs::path(entry.wav_path)
                                                             : fs::path(base_dir) / entry.wav_path;
  const fs::path lab = fs::path(entry.label_path).is_absolute() ? fs::path(entry.label_path)
                                                               : fs::path(base_dir) / entry.label_path;
  c.logmel = front.LogMel(ReadWav(wav.string()));
  const auto total = static_cast<std::size_t>(c.logmel.rows());
  const auto segs = ReadSegmentFile(lab.string());
  const auto speech = SegmentsByUtt(segs, "speech");
  const auto target = SegmentsByUtt(segs, "target");
  const auto find = [&](const std::map<std::string, SegmentList> &m) {
    const auto it = m.find(entry.conv_id);
    return it == m.end() ? SegmentList{} : it->second;
  };
  c.speech = FromSegments(find(speech), total);
  c.target = FromSegments(find(target), total);
  return c;
}

std::vector<LoadedConversation> LoadConversations(const FrontEnd &front,
                                                  const std::string &base_dir,
                                                  const std::vector<ManifestEntry> &entries) {
  std::vector<LoadedConversation> out(entries.size());
  ParallelFor(entries.size(), [&](std::size_t i) { out[i] = LoadConversation(front, base_dir, entries[i]); });
  return out;
}

Vector EnrollmentEmbedding(const FrontEnd &front, const SpeakerBackend &backend,
                           const CorpusIndex &corpus, const std::vector<std::string> &enroll_ids) {
  if (enroll_ids.empty()) throw DataError("no enrollment utterances given");
  BwStats total(backend.ubm.NumComponents(), backend.ubm.Dim());
  for (const auto &id : enroll_ids) {
    const UttFeatures f = LoadUtterance(front, corpus, corpus.Get(id));
    total.Add(ComputeBwStats(SelectRows(f.mfcc, f.speech), backend.ubm));
  }
  if (total.TotalOccupancy() <= 0.0)
    throw DataError("enrollment utterances hold no speech frames");
  return backend.EmbedStats(total);
}

Labels BaselineDetect(const Detector &vad, const SpeakerBackend &backend, const Matrix &logmel,
                      const Matrix &mfcc, const Vector &enrollment) {
  if (!backend.scorer) throw ContractError("baseline needs a PLDA backend");
  if (enrollment.size() == 0) throw DataError("baseline needs an enrollment i-vector");
  return VerifySegments(vad.Detect(logmel), backend, mfcc, enrollment);
}

Labels VerifySegments(Labels labels, const SpeakerBackend &backend, const Matrix &mfcc,
                      const Vector &enrollment) {
  if (!backend.scorer) throw ContractError("verification needs a PLDA backend");
  for (const Segment &s : ToSegments(labels)) {
    const double score = backend.scorer->Score(enrollment, backend.Embed(mfcc, {s}));
    if (score < backend.sv.threshold) std::fill(labels.begin() + s.start, labels.begin() + s.end, 0);
  }
  return labels;
}

Labels StreamDetect(const FrontEnd &front, const Detector &detector, const AudioSignal &audio,
                    std::size_t block_samples) {
  if (audio.sample_rate != front.SampleRate())
    throw DataError("audio sampled at " + std::to_string(audio.sample_rate) + " Hz, expected " +
                    std::to_string(front.SampleRate()));
  if (block_samples == 0) block_samples = 1;
  StreamState state(detector, front.NumMels());
  FrontEnd::Online online(front);
  Labels out;
  for (std::size_t pos = 0; pos < audio.samples.size(); pos += block_samples) {
    const std::size_t n = std::min(block_samples, audio.samples.size() - pos);
    online.Accept(std::span<const double>(audio.samples.data() + pos, n),
                  [&](std::span<const double> row) { state.Push(row, &out); });
  }
  if (state.Consumed() == 0) throw DataError("audio is shorter than one frame");
  state.Finish(&out);
  return out;
}

// ---------------------------------------------------------------- eval

namespace {

nlohmann::ordered_json ScoresJson(const FrameScores &f, const JvadReport &j) {
  nlohmann::ordered_json o;
  o["tp"] = f.tp;
  o["fp"] = f.fp;
  o["tn"] = f.tn;
  o["fn"] = f.fn;
  o["acc"] = f.acc;
  o["precision"] = f.precision;
  o["recall"] = f.recall;
  o["f1"] = f.f1;
  o["sba"] = j.sba;
  o["eba"] = j.eba;
  o["bp"] = j.bp;
  o["jvad"] = j.jvad;
  return o;
}

}  // namespace

nlohmann::ordered_json EvaluateSystems(const FrontEnd &front, const std::string &base_dir,
                                       const std::vector<ManifestEntry> &manifest,
                                       const std::vector<std::pair<std::string, std::string>> &systems,
                                       std::size_t tolerance) {
  std::vector<Labels> refs(manifest.size());
  ParallelFor(manifest.size(), [&](std::size_t i) {
    const fs::path lab = fs::path(base_dir) / manifest[i].label_path;
    const fs::path wav = fs::path(base_dir) / manifest[i].wav_path;
    const std::size_t total = front.NumFramesFor(ReadWav(wav.string()).samples.size());
    const auto target = SegmentsByUtt(ReadSegmentFile(lab.string()), "target");
    const auto it = target.find(manifest[i].conv_id);
    refs[i] = FromSegments(it == target.end() ? SegmentList{} : it->second, total);
  });

  nlohmann::ordered_json report;
  report["tolerance_frames"] = tolerance;
  report["utterances"] = manifest.size();
  report["systems"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json comparison = nlohmann::ordered_json::array();
  for (const auto &[name, path] : systems) {
    const auto hyps = SegmentsByUtt(ReadSegmentFile(path), "target");
    PooledScores pooled;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      const auto it = hyps.find(manifest[i].conv_id);
      Labels hyp;
      try {
        hyp = FromSegments(it == hyps.end() ? SegmentList{} : it->second, refs[i].size());
      } catch (const ContractError &e) {
        skipped.push_back({{"id", manifest[i].conv_id},
                           {"reason", std::string("hypothesis does not fit the ") +
                                          std::to_string(refs[i].size()) + "-frame reference: " + e.what()}});
        continue;
      }
      const FrameScores f = ComputeFrameScores(refs[i], hyp);
      const JvadReport j = ComputeJvad(refs[i], hyp, tolerance);
      pooled.Add(refs[i], hyp, tolerance);
      nlohmann::ordered_json u;
      u["id"] = manifest[i].conv_id;
      u["frames"] = refs[i].size();
      const nlohmann::ordered_json scores = ScoresJson(f, j);
      for (const auto &[k, v] : scores.items()) u[k] = v;
      per.push_back(std::move(u));
    }
    FrameScores agg = pooled.frames;
    agg.Finalize();
    const JvadReport aj = pooled.Jvad();
    nlohmann::ordered_json sys;
    sys["name"] = name;
    sys["aggregate"] = ScoresJson(agg, aj);
    sys["aggregate"]["utterances"] = pooled.utterances;
    sys["skipped"] = skipped;
    sys["per_utterance"] = per;
    report["systems"].push_back(sys);
    comparison.push_back({{"system", name},
                          {"acc", agg.acc},
                          {"f1", agg.f1},
                          {"sba", aj.sba},
                          {"eba", aj.eba},
                          {"bp", aj.bp},
                          {"jvad", aj.jvad}});
  }
  if (systems.size() > 1) report["comparison"] = comparison;
  return report;
}

// ---------------------------------------------------------------- recipes

void RunSynthCorpus(const EngineConfig &config) {
  BuildDataset(config.dataset, config.corpus_dir);
  Log("wrote corpus to " + config.corpus_dir + " (" + std::to_string(config.dataset.n_train) + "/" +
      std::to_string(config.dataset.n_dev) + "/" + std::to_string(config.dataset.n_test) +
      " speakers)");
}

void RunTrainUbm(const EngineConfig &config) {
  const FrontEnd front(config);
  const CorpusIndex corpus = CorpusIndex::Load(config.corpus_dir);
  const auto utts = LoadTrainUtterances(front, corpus);
  std::vector<FeatureMatrix> feats;
  for (const auto &u : utts) {
    FeatureMatrix f;
    f.values = SelectRows(u.mfcc, u.speech);
    if (f.values.rows() > 0) feats.push_back(std::move(f));
  }
  std::vector<double> trace;
  const DiagGmm ubm = TrainUbm(feats, config.ubm, &trace);
  for (std::size_t i = 0; i < trace.size(); ++i)
    Log("ubm iter " + std::to_string(i) + " total loglik " + Fixed(trace[i], 6));
  EnsureParent(config.UbmPath());
  SaveUbm(config.UbmPath(), ubm);
  Log("wrote " + config.UbmPath());
}

void RunTrainTv(const EngineConfig &config) {
  const FrontEnd front(config);
  RequireFile(config.UbmPath(), "train-ubm");
  const DiagGmm ubm = LoadUbm(config.UbmPath());
  const CorpusIndex corpus = CorpusIndex::Load(config.corpus_dir);
  const auto utts = LoadTrainUtterances(front, corpus);
  std::vector<BwStats> stats(utts.size());
  ParallelFor(utts.size(), [&](std::size_t i) {
    stats[i] = ComputeBwStats(SelectRows(utts[i].mfcc, utts[i].speech), ubm);
  });
  std::vector<double> trace;
  const TvMatrix tv = TrainTv(stats, ubm, config.tv, &trace);
  for (std::size_t i = 0; i < trace.size(); ++i)
    Log("tv iter " + std::to_string(i) + " objective " + Fixed(trace[i], 4));
  EnsureParent(config.TvPath());
  SaveTv(config.TvPath(), tv);
  Log("wrote " + config.TvPath());
}

void RunTrainPlda(const EngineConfig &config) {
  const FrontEnd front(config);
  const SpeakerBackend backend = LoadBackend(config, false);
  const CorpusIndex corpus = CorpusIndex::Load(config.corpus_dir);
  const auto entries = TrainUtterances(corpus);
  const auto utts = LoadTrainUtterances(front, corpus);

  // One i-vector per reference speech segment, matching how the baseline
  // scores detected segments.
  std::vector<std::vector<Vector>> per_utt(utts.size());
  ParallelFor(utts.size(), [&](std::size_t i) {
    for (const Segment &s : ToSegments(utts[i].speech)) per_utt[i].push_back(backend.Embed(utts[i].mfcc, {s}));
  });
  std::vector<IVector> ivecs;
  std::vector<std::string> speakers;
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (const Vector &v : per_utt[i]) {
      ivecs.push_back({v, true});
      speakers.push_back(entries[i]->speaker);
    }
  SvBackend sv;
  sv.plda = TrainPlda(ivecs, speakers);
  Log("plda trained on " + std::to_string(ivecs.size()) + " segment i-vectors");

  // Threshold at the equal-error point of dev trials: each reference speech
  // segment of a dev conversation scored against the target enrollment.
  const auto dev = corpus.Manifest("dev");
  const auto enroll = EnrollmentTable(front, backend, corpus, dev);
  const auto convs = LoadConversations(front, config.corpus_dir, dev);
  const PldaScorer scorer(sv.plda);
  std::vector<std::vector<std::pair<double, bool>>> trials(convs.size());
  ParallelFor(convs.size(), [&](std::size_t i) {
    const auto &c = convs[i];
    const Matrix mfcc = front.Mfcc(c.logmel);
    const Vector &e = enroll.at(c.entry.target);
    for (const Segment &s : ToSegments(c.speech))
      trials[i].push_back({scorer.Score(e, backend.Embed(mfcc, {s})), c.target[s.start] != 0});
  });
  std::vector<double> tar, non;
  for (const auto &t : trials)
    for (const auto &[score, is_target] : t) (is_target ? tar : non).push_back(score);
  if (tar.empty() || non.empty())
    throw DataError("dev conversations yield no target or no non-target trials for calibration");
  double eer = 0.0;
  sv.threshold = EerThreshold(tar, non, &eer);
  Log("dev EER " + Fixed(100.0 * eer, 2) + "% over " + std::to_string(tar.size()) + " target / " +
      std::to_string(non.size()) + " non-target trials; threshold " + Fixed(sv.threshold, 4));
  EnsureParent(config.SvPath());
  SaveSv(config.SvPath(), sv);
  Log("wrote " + config.SvPath());
}

void RunTrainVad(const EngineConfig &config) {
  TrainDetector(config, config.vad, false, config.VadPath());
}

void RunTrainSdvad(const EngineConfig &config) {
  TrainDetector(config, config.sdvad, true, config.SdvadPath());
}

void RunInfer(const EngineConfig &config, const InferRequest &request) {
  const FrontEnd front(config);
  Detector proto = LoadDetector(config.SdvadPath(), "train-sdvad", config.sdvad_post);
  if (request.bin_override > 0 && request.bin_override != proto.meta.bin)
    throw ConfigError("--bin " + std::to_string(request.bin_override) + " but " +
                      config.SdvadPath() + " was trained with bin " + std::to_string(proto.meta.bin));
  if (proto.meta.embedding_dim == 0)
    throw ConfigError(config.SdvadPath() + " is not speaker-conditioned; use `baseline` for VAD models");
  const std::string manifest_path = DefaultManifest(config, request.manifest, "test");
  const std::string base = BaseDir(manifest_path);
  const auto manifest = ReadManifest(manifest_path);
  const CorpusIndex corpus = CorpusIndex::Load(base);
  const SpeakerBackend backend = LoadBackend(config, false);
  const auto enroll = EnrollmentTable(front, backend, corpus, manifest);
  Log(std::string(request.stream ? "streaming" : "batch") + " inference, algorithmic latency " +
      std::to_string(Detector{proto.model, proto.meta, enroll.begin()->second, proto.post}.Latency()) +
      " frames (merge may add up to " + std::to_string(proto.MaxMergeDelay()) + ")");

  std::vector<Labels> labels(manifest.size());
  ParallelFor(manifest.size(), [&](std::size_t i) {
    const Detector det{proto.model, proto.meta, enroll.at(manifest[i].target), proto.post};
    const fs::path wav = fs::path(base) / manifest[i].wav_path;
    const AudioSignal audio = ReadWav(wav.string());
    labels[i] = request.stream ? StreamDetect(front, det, audio) : det.Detect(front.LogMel(audio));
  });
  WriteHypotheses(request.output, manifest, labels);
  Log("wrote " + request.output);
}

void RunBaseline(const EngineConfig &config, const InferRequest &request) {
  const FrontEnd front(config);
  const Detector vad = LoadDetector(config.VadPath(), "train-vad", config.vad_post);
  if (vad.meta.embedding_dim != 0) throw ConfigError(config.VadPath() + " is speaker-conditioned");
  const SpeakerBackend backend = LoadBackend(config, true);
  const std::string manifest_path = DefaultManifest(config, request.manifest, "test");
  const std::string base = BaseDir(manifest_path);
  const auto manifest = ReadManifest(manifest_path);
  const CorpusIndex corpus = CorpusIndex::Load(base);
  const auto enroll = EnrollmentTable(front, backend, corpus, manifest);
  std::vector<Labels> labels(manifest.size());
  ParallelFor(manifest.size(), [&](std::size_t i) {
    const fs::path wav = fs::path(base) / manifest[i].wav_path;
    const Matrix logmel = front.LogMel(ReadWav(wav.string()));
    labels[i] = BaselineDetect(vad, backend, logmel, front.Mfcc(logmel), enroll.at(manifest[i].target));
  });
  WriteHypotheses(request.output, manifest, labels);
  Log("wrote " + request.output);
}

void RunEval(const EngineConfig &config, const std::string &manifest,
             const std::vector<std::pair<std::string, std::string>> &systems,
             const std::string &report_path) {
  if (systems.empty()) throw ConfigError("eval needs at least one hypothesis file");
  const FrontEnd front(config);
  const std::string manifest_path = DefaultManifest(config, manifest, "test");
  const auto report = EvaluateSystems(front, BaseDir(manifest_path), ReadManifest(manifest_path),
                                      systems, config.tolerance);
  EnsureParent(report_path);
  std::ofstream os(report_path);
  if (!os) throw DataError("cannot write " + report_path);
  os << report.dump(2) << '\n';
  for (const auto &s : report["systems"])
    Log(s["name"].get<std::string>() + ": ACC " + Fixed(s["aggregate"]["acc"].get<double>()) + " F1 " +
        Fixed(s["aggregate"]["f1"].get<double>()) + " BP " + Fixed(s["aggregate"]["bp"].get<double>()) +
        " J_VAD " + Fixed(s["aggregate"]["jvad"].get<double>()));
}

}  // namespace sdvad
