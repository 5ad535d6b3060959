// src/feats.cc

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


#include "sdvad/feats.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>

#include "sdvad/kernels.h"

namespace sdvad {

int FrameOptions::WindowSamples(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * frame_length_ms / 1000.0));
}

int FrameOptions::ShiftSamples(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * frame_shift_ms / 1000.0));
}

std::size_t NumFrames(std::size_t num_samples, int window, int shift) {
  if (window <= 0 || shift <= 0 || num_samples < static_cast<std::size_t>(window)) return 0;
  return 1 + (num_samples - window) / shift;
}

void PreprocessFrame(std::span<double> frame, double preemph) {
  const std::size_t n = frame.size();
  if (n == 0) return;
  for (std::size_t i = n - 1; i > 0; --i) frame[i] -= preemph * frame[i - 1];
  frame[0] -= preemph * frame[0];
  if (n == 1) return;
  const double a = 2.0 * std::numbers::pi / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    frame[i] *= 0.54 - 0.46 * std::cos(a * static_cast<double>(i));
}

Matrix FrameSignal(const AudioSignal &signal, const FrameOptions &opts) {
  if (signal.sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!(opts.frame_shift_ms > 0) || opts.frame_length_ms < opts.frame_shift_ms)
    throw ConfigError("need frame_length >= frame_shift > 0");
  const int win = opts.WindowSamples(signal.sample_rate);
  const int hop = opts.ShiftSamples(signal.sample_rate);
  const std::size_t t_count = NumFrames(signal.samples.size(), win, hop);
  if (t_count == 0)
    throw DataError("signal of " + std::to_string(signal.samples.size()) +
                    " samples is shorter than one frame (" + std::to_string(win) + ")");
  Matrix frames(static_cast<Eigen::Index>(t_count), win);
  for (std::size_t t = 0; t < t_count; ++t) {
    double *row = frames.row(static_cast<Eigen::Index>(t)).data();
    std::copy_n(signal.samples.begin() + static_cast<std::ptrdiff_t>(t * hop), win, row);
    PreprocessFrame(std::span<double>(row, win), opts.preemph);
  }
  return frames;
}

double HzToMel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

namespace {

std::mutex &PlannerMutex() {
  static std::mutex m;
  return m;
}

int NextPow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

struct MelBank::Plan {
  fftw_plan plan = nullptr;
  double *in = nullptr;
  fftw_complex *out = nullptr;
  ~Plan() {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    if (plan) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

MelBank::MelBank(int n_mels, int sample_rate, int frame_samples, double low_hz,
                 double high_hz)
    : n_mels_(n_mels), sample_rate_(sample_rate), frame_samples_(frame_samples) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (sample_rate <= 0 || frame_samples <= 0) throw ConfigError("bad mel bank geometry");
  if (high_hz <= 0) high_hz = sample_rate / 2.0;
  if (!(low_hz >= 0 && low_hz < high_hz && high_hz <= sample_rate / 2.0))
    throw ConfigError("mel bank needs 0 <= low < high <= nyquist");
  fft_size_ = NextPow2(frame_samples);

  const double mel_lo = HzToMel(low_hz), mel_hi = HzToMel(high_hz);
  const double step = (mel_hi - mel_lo) / (n_mels + 1);
  const int num_bins = fft_size_ / 2 + 1;
  first_bin_.resize(n_mels);
  weights_.resize(n_mels);
  centers_hz_.resize(n_mels);
  for (int k = 0; k < n_mels; ++k) {
    const double left = mel_lo + k * step, center = left + step, right = center + step;
    centers_hz_[k] = MelToHz(center);
    first_bin_[k] = -1;
    for (int b = 0; b < num_bins; ++b) {
      const double m = HzToMel(BinHz(b));
      double w = 0.0;
      if (m > left && m < right) w = m <= center ? (m - left) / step : (right - m) / step;
      if (w > 0.0) {
        if (first_bin_[k] < 0) first_bin_[k] = b;
        weights_[k].resize(b - first_bin_[k] + 1, 0.0);
        weights_[k].back() = w;
      }
    }
    if (first_bin_[k] < 0) first_bin_[k] = 0;
  }

  plan_ = std::make_unique<Plan>();
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plan_->in = fftw_alloc_real(fft_size_);
  plan_->out = fftw_alloc_complex(num_bins);
  plan_->plan = fftw_plan_dft_r2c_1d(fft_size_, plan_->in, plan_->out, FFTW_ESTIMATE);
}

MelBank::~MelBank() = default;

double MelBank::CenterHz(int mel) const { return centers_hz_.at(mel); }

double MelBank::Weight(int mel, int bin) const {
  const int off = bin - first_bin_.at(mel);
  if (off < 0 || off >= static_cast<int>(weights_[mel].size())) return 0.0;
  return weights_[mel][off];
}

void MelBank::Compute(std::span<const double> frame, std::span<double> out) const {
  if (static_cast<int>(frame.size()) != frame_samples_ ||
      static_cast<int>(out.size()) != n_mels_)
    throw ContractError("MelBank::Compute: frame/output size mismatch");
  const int num_bins = fft_size_ / 2 + 1;
  double *in = fftw_alloc_real(fft_size_);
  fftw_complex *spec = fftw_alloc_complex(num_bins);
  std::copy(frame.begin(), frame.end(), in);
  std::fill(in + frame_samples_, in + fft_size_, 0.0);
  fftw_execute_dft_r2c(plan_->plan, in, spec);
  std::vector<double> power(num_bins);
  for (int b = 0; b < num_bins; ++b) power[b] = spec[b][0] * spec[b][0] + spec[b][1] * spec[b][1];
  fftw_free(in);
  fftw_free(spec);
  for (int k = 0; k < n_mels_; ++k) {
    double e = 0.0;
    const auto &w = weights_[k];
    for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * power[first_bin_[k] + i];
    out[k] = std::log(std::max(e, kLogFloor));
  }
}

FeatureMatrix LogMel(const Matrix &frames, int n_mels, int sample_rate,
                     const FrameOptions &opts) {
  FeatureMatrix feats;
  feats.frame_length_ms = opts.frame_length_ms;
  feats.frame_shift_ms = opts.frame_shift_ms;
  if (frames.rows() == 0) {
    feats.values.resize(0, n_mels);
    return feats;
  }
  MelBank bank(n_mels, sample_rate, static_cast<int>(frames.cols()));
  feats.values = kernels::LogMelParallel(bank, frames);
  return feats;
}

FeatureMatrix ComputeLogMel(const AudioSignal &signal, int n_mels, const FrameOptions &opts) {
  return LogMel(FrameSignal(signal, opts), n_mels, signal.sample_rate, opts);
}

Matrix DctMatrix(int n_in, int n_out) {
  Matrix dct(n_out, n_in);
  const double pi = std::numbers::pi;
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int n = 0; n < n_in; ++n)
      dct(k, n) = scale * std::cos(pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return dct;
}

FeatureMatrix Mfcc(const FeatureMatrix &logmel, int n_ceps) {
  const auto n_mels = static_cast<int>(logmel.Dim());
  if (n_ceps < 1 || n_ceps > n_mels)
    throw ConfigError("n_ceps (" + std::to_string(n_ceps) + ") must be in [1, n_mels=" +
                      std::to_string(n_mels) + "]");
  FeatureMatrix out;
  out.frame_length_ms = logmel.frame_length_ms;
  out.frame_shift_ms = logmel.frame_shift_ms;
  const Matrix dct = DctMatrix(n_mels, n_ceps);
  out.values.resize(logmel.NumFrames(), n_ceps);
  // Row at a time so each frame's coefficients do not depend on its neighbours.
  for (Eigen::Index t = 0; t < logmel.NumFrames(); ++t)
    for (int k = 0; k < n_ceps; ++k) {
      double acc = 0.0;
      for (int n = 0; n < n_mels; ++n) acc += dct(k, n) * logmel.values(t, n);
      out.values(t, k) = acc;
    }
  return out;
}

FeatureMatrix ContextWindow(const FeatureMatrix &feats, int r) {
  if (r < 0) throw ConfigError("context must be >= 0");
  const Eigen::Index rows = feats.NumFrames(), dim = feats.Dim();
  FeatureMatrix out = feats;
  out.values.resize(rows, dim * (2 * r + 1));
  for (Eigen::Index t = 0; t < rows; ++t)
    for (int j = -r; j <= r; ++j) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + j, 0, rows - 1);
      out.values.block(t, (j + r) * dim, 1, dim) = feats.values.row(src);
    }
  return out;
}

FeatureMatrix BinFeatures(const FeatureMatrix &feats, int n) {
  if (n < 1) throw ConfigError("bin size must be >= 1");
  const Eigen::Index rows = feats.NumFrames(), dim = feats.Dim();
  const Eigen::Index out_rows = (rows + n - 1) / n;
  FeatureMatrix out;
  out.frame_length_ms = feats.frame_length_ms;
  out.frame_shift_ms = feats.frame_shift_ms * n;
  out.values.resize(out_rows, dim);
  for (Eigen::Index k = 0; k < out_rows; ++k) {
    const Eigen::Index begin = k * n, end = std::min<Eigen::Index>(begin + n, rows);
    for (Eigen::Index d = 0; d < dim; ++d) {
      double sum = 0.0;
      for (Eigen::Index t = begin; t < end; ++t) sum += feats.values(t, d);
      out.values(k, d) = sum / static_cast<double>(end - begin);
    }
  }
  return out;
}

std::vector<double> ExpandPredictions(std::span<const double> preds, int n,
                                      std::size_t orig_len) {
  if (n < 1) throw ConfigError("bin size must be >= 1");
  if (preds.size() != (orig_len + n - 1) / n)
    throw ContractError("ExpandPredictions: " + std::to_string(preds.size()) +
                        " predictions cannot cover " + std::to_string(orig_len) +
                        " frames with bin size " + std::to_string(n));
  std::vector<double> out(orig_len);
  for (std::size_t t = 0; t < orig_len; ++t) out[t] = preds[t / n];
  return out;
}

Labels ExpandLabels(const Labels &labels, int n, std::size_t orig_len) {
  if (n < 1) throw ConfigError("bin size must be >= 1");
  if (labels.size() != (orig_len + n - 1) / n)
    throw ContractError("ExpandLabels: length mismatch");
  Labels out(orig_len);
  for (std::size_t t = 0; t < orig_len; ++t) out[t] = labels[t / n];
  return out;
}

Labels BinLabels(const Labels &labels, int n) {
  if (n < 1) throw ConfigError("bin size must be >= 1");
  Labels out((labels.size() + n - 1) / n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t begin = k * n, end = std::min(begin + n, labels.size());
    std::size_t ones = 0;
    for (std::size_t t = begin; t < end; ++t) ones += labels[t];
    // mean >= 0.5  <=>  2 * ones >= count
    out[k] = 2 * ones >= end - begin ? 1 : 0;
  }
  return out;
}

void WriteFeaturesCsv(const std::string &path, const FeatureMatrix &feats) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << std::setprecision(17);
  for (Eigen::Index t = 0; t < feats.NumFrames(); ++t) {
    for (Eigen::Index d = 0; d < feats.Dim(); ++d) os << (d ? "," : "") << feats.values(t, d);
    os << '\n';
  }
}

Vector RandomLogGain(int n, double scale, std::mt19937_64 *rng) {
  if (n < 1) throw ConfigError("RandomLogGain: need at least one band");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(*rng); };
  Vector g(n);
  const double tilt = uniform(-scale, scale);
  double center[2], width[2], amp[2];
  for (int j = 0; j < 2; ++j) {
    center[j] = uniform(0.0, n - 1.0);
    width[j] = uniform(1.5, 6.0);
    amp[j] = uniform(-scale, scale);
  }
  for (int k = 0; k < n; ++k) {
    double v = tilt * (n > 1 ? static_cast<double>(k) / (n - 1) - 0.5 : 0.0);
    for (int j = 0; j < 2; ++j) v += amp[j] * std::exp(-0.5 * std::pow((k - center[j]) / width[j], 2));
    g[k] = v;
  }
  return g;
}

Matrix RecolourSpeech(const Matrix &logmel, const Labels &speech, const Labels &selected,
                      const Vector &log_gain) {
  const auto rows = static_cast<std::size_t>(logmel.rows());
  if (speech.size() != rows || selected.size() != rows || log_gain.size() != logmel.cols())
    throw ContractError("RecolourSpeech: inconsistent sizes");
  Vector noise = Vector::Zero(logmel.cols());
  double quiet = 0.0;
  for (std::size_t t = 0; t < rows; ++t)
    if (!speech[t]) {
      noise += logmel.row(static_cast<Eigen::Index>(t)).array().exp().matrix().transpose();
      quiet += 1.0;
    }
  if (quiet > 0) noise /= quiet;
  const Vector gain = log_gain.array().exp();
  Matrix out = logmel;
  for (std::size_t t = 0; t < rows; ++t) {
    if (!selected[t]) continue;
    const auto r = static_cast<Eigen::Index>(t);
    for (Eigen::Index k = 0; k < logmel.cols(); ++k) {
      const double p = std::max(std::exp(logmel(r, k)) - noise[k], 0.0) * gain[k] + noise[k];
      out(r, k) = std::log(std::max(p, kLogFloor));
    }
  }
  return out;
}

}  // namespace sdvad
