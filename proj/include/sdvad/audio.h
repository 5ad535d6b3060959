// sdvad/audio.h

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


#ifndef SDVAD_AUDIO_H_
#define SDVAD_AUDIO_H_

#include <string>
#include <vector>

namespace sdvad {

/// Single-channel audio, amplitudes nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 8000;

  double Duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a mono 16-bit PCM little-endian WAV file.  Throws FormatError for
/// anything else (stereo, float WAV, truncated chunks).
AudioSignal ReadWav(const std::string &path);

/// Writes 16-bit PCM.  Samples are clipped to [-1, 1] and rounded to the
/// nearest integer level, so ReadWav(WriteWav(x)) is the quantized signal.
void WriteWav(const std::string &path, const AudioSignal &audio);

/// Raw float32 little-endian samples with a declared sample rate.
AudioSignal ReadRawFloat(const std::string &path, int sample_rate);

/// Rounds every sample to the 16-bit grid used by WriteWav.
void QuantizePcm16(AudioSignal *audio);

}  // namespace sdvad

#endif  // SDVAD_AUDIO_H_
