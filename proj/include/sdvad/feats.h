// sdvad/feats.h

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


#ifndef SDVAD_FEATS_H_
#define SDVAD_FEATS_H_

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdvad/audio.h"
#include "sdvad/common.h"

namespace sdvad {

/// T x D per-frame features plus the frame grid they live on.
struct FeatureMatrix {
  Matrix values;
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;

  Eigen::Index NumFrames() const { return values.rows(); }
  Eigen::Index Dim() const { return values.cols(); }
};

struct FrameOptions {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double preemph = 0.97;

  int WindowSamples(int sample_rate) const;
  int ShiftSamples(int sample_rate) const;
};

/// Number of complete frames in a signal of `num_samples`; 0 if shorter
/// than one window.
std::size_t NumFrames(std::size_t num_samples, int window, int shift);

/// Pre-emphasis then Hamming window, in place, on one raw frame.  Each frame
/// is processed on its own samples only, so frames can be produced
/// independently (streaming) with bit-identical results.
void PreprocessFrame(std::span<double> frame, double preemph);

/// T x window matrix of pre-emphasized, Hamming-windowed frames.
/// Throws DataError if the signal is shorter than one frame.
Matrix FrameSignal(const AudioSignal &signal, const FrameOptions &opts);

/// Triangular mel filterbank over an FFT power spectrum.  Immutable after
/// construction and safe to share between threads.
class MelBank {
 public:
  MelBank(int n_mels, int sample_rate, int frame_samples,
          double low_hz = 20.0, double high_hz = -1.0);
  ~MelBank();
  MelBank(const MelBank &) = delete;
  MelBank &operator=(const MelBank &) = delete;

  int NumMels() const { return n_mels_; }
  int FftSize() const { return fft_size_; }
  int FrameSamples() const { return frame_samples_; }
  double BinHz(int bin) const { return bin * static_cast<double>(sample_rate_) / fft_size_; }
  double CenterHz(int mel) const;
  /// Weight of filter `mel` at FFT bin `bin`.
  double Weight(int mel, int bin) const;

  /// One windowed frame in, n_mels log energies out (floor 1e-10).
  void Compute(std::span<const double> frame, std::span<double> out) const;

 private:
  int n_mels_;
  int sample_rate_;
  int frame_samples_;
  int fft_size_;
  std::vector<double> centers_hz_;
  // Per filter: first bin and weights over consecutive bins.
  std::vector<int> first_bin_;
  std::vector<std::vector<double>> weights_;
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

static constexpr double kLogFloor = 1e-10;

double HzToMel(double hz);
double MelToHz(double mel);

/// Log-mel energies for every row of `frames`.
FeatureMatrix LogMel(const Matrix &frames, int n_mels, int sample_rate,
                     const FrameOptions &opts = {});

/// Convenience: FrameSignal followed by LogMel.
FeatureMatrix ComputeLogMel(const AudioSignal &signal, int n_mels,
                            const FrameOptions &opts = {});

/// Orthonormal DCT-II basis, n_out x n_in.
Matrix DctMatrix(int n_in, int n_out);

/// First n_ceps orthonormal DCT-II coefficients of each log-mel row.
/// ConfigError if n_ceps exceeds the log-mel dimension.
FeatureMatrix Mfcc(const FeatureMatrix &logmel, int n_ceps);

/// Stacks each frame with r frames of left and right context, replicating
/// the first/last frame past the edges.  Output dim is D * (2r + 1).
FeatureMatrix ContextWindow(const FeatureMatrix &feats, int r);

/// Non-overlapping mean over groups of n frames; the final partial group is
/// averaged over its actual members.  ceil(T/n) rows.
FeatureMatrix BinFeatures(const FeatureMatrix &feats, int n);

/// Repeats each prediction n times and truncates to orig_len.
std::vector<double> ExpandPredictions(std::span<const double> preds, int n,
                                      std::size_t orig_len);
Labels ExpandLabels(const Labels &labels, int n, std::size_t orig_len);

/// Label of a bin is 1 iff the mean of its member labels is >= 0.5.
Labels BinLabels(const Labels &labels, int n);

void WriteFeaturesCsv(const std::string &path, const FeatureMatrix &feats);

/// Smooth random log-gain curve over n bands (training augmentation): a
/// linear tilt plus two Gaussian bumps, each of amplitude at most `scale`.
Vector RandomLogGain(int n, double scale, std::mt19937_64 *rng);

/// Re-colours the speech component of the `selected` rows of a log-mel
/// matrix.  With P the band power of a row and N the mean band power of the
/// non-speech rows (zero if there are none), a selected row becomes
/// log(max(P - N, 0) * exp(log_gain) + N), floored like the front end.
/// Rows not selected are copied.  ContractError on size mismatch.
Matrix RecolourSpeech(const Matrix &logmel, const Labels &speech, const Labels &selected,
                      const Vector &log_gain);

}  // namespace sdvad

#endif  // SDVAD_FEATS_H_
