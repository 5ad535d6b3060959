// src/audio.cc

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


#include "sdvad/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sdvad/common.h"

namespace sdvad {

namespace {

std::uint32_t ReadU32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char *p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

void PutU32(std::string *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string *out, std::uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>(v >> 8));
}

std::int16_t ToPcm16(double x) {
  double c = std::clamp(x, -1.0, 1.0) * 32767.0;
  return static_cast<std::int16_t>(std::lround(c));
}

std::vector<unsigned char> Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open audio file " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

AudioSignal ReadWav(const std::string &path) {
  std::vector<unsigned char> buf = Slurp(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path + ": not a RIFF/WAVE file");

  AudioSignal audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char *chunk = buf.data() + pos;
    std::uint32_t size = ReadU32(chunk + 4);
    if (pos + 8 + size > buf.size())
      throw FormatError(path + ": chunk at offset " + std::to_string(pos) +
                        " runs past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path + ": short fmt chunk");
      std::uint16_t format = ReadU16(chunk + 8);
      std::uint16_t channels = ReadU16(chunk + 10);
      std::uint16_t bits = ReadU16(chunk + 22);
      if (format != 1 || channels != 1 || bits != 16)
        throw FormatError(path + ": only mono 16-bit PCM is supported");
      audio.sample_rate = static_cast<int>(ReadU32(chunk + 12));
      if (audio.sample_rate <= 0) throw FormatError(path + ": bad sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      std::size_t n = size / 2;
      audio.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = static_cast<std::int16_t>(ReadU16(chunk + 8 + 2 * i));
        audio.samples[i] = v / 32767.0;
      }
      return audio;
    }
    pos += 8 + size + (size & 1);
  }
  throw FormatError(path + ": no data chunk");
}

void WriteWav(const std::string &path, const AudioSignal &audio) {
  std::string out;
  auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out += "RIFF";
  PutU32(&out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, static_cast<std::uint32_t>(audio.sample_rate));
  PutU32(&out, static_cast<std::uint32_t>(audio.sample_rate * 2));
  PutU16(&out, 2);
  PutU16(&out, 16);
  out += "data";
  PutU32(&out, data_bytes);
  for (double s : audio.samples) PutU16(&out, static_cast<std::uint16_t>(ToPcm16(s)));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

AudioSignal ReadRawFloat(const std::string &path, int sample_rate) {
  if (sample_rate <= 0) throw ConfigError("raw audio needs a positive sample rate");
  std::vector<unsigned char> buf = Slurp(path);
  if (buf.size() % 4 != 0)
    throw FormatError(path + ": size is not a multiple of 4 bytes");
  AudioSignal audio;
  audio.sample_rate = sample_rate;
  audio.samples.resize(buf.size() / 4);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    std::uint32_t bits = ReadU32(buf.data() + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f))
      throw DataError(path + ": non-finite sample at index " + std::to_string(i));
    audio.samples[i] = f;
  }
  return audio;
}

void QuantizePcm16(AudioSignal *audio) {
  for (double &s : audio->samples) s = ToPcm16(s) / 32767.0;
}

}  // namespace sdvad
