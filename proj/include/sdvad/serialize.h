// sdvad/serialize.h

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


#ifndef SDVAD_SERIALIZE_H_
#define SDVAD_SERIALIZE_H_

// Engine-wide model file:
//   "SDVD" | u32 version (=1) | u32 tensor count |
//   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank],
//               float32 values (row-major)
// All integers and floats little-endian.

#include <cstdint>
#include <string>
#include <vector>

#include "sdvad/nnet.h"
#include "sdvad/speaker.h"

namespace sdvad {

inline constexpr char kModelMagic[4] = {'S', 'D', 'V', 'D'};
inline constexpr std::uint32_t kModelVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

std::string EncodeTensors(const std::vector<Tensor> &tensors);
/// Throws FormatError naming the byte offset of the first problem.
std::vector<Tensor> DecodeTensors(const std::string &bytes, const std::string &source = "<memory>");

void WriteTensorFile(const std::string &path, const std::vector<Tensor> &tensors);
std::vector<Tensor> ReadTensorFile(const std::string &path);

/// PLDA model plus the calibrated accept threshold of the SV stage.
struct SvBackend {
  PldaModel plda;
  double threshold = 0.0;
};

std::vector<Tensor> ToTensors(const DiagGmm &ubm);
std::vector<Tensor> ToTensors(const TvMatrix &tv);
std::vector<Tensor> ToTensors(const SvBackend &sv);
/// How a classifier's input was assembled; stored alongside its weights as a
/// "<kind>.meta" tensor of three values.
struct FrontEndMeta {
  int bin = 1;            // feature binning factor
  int context = 0;        // +-frames of context (MLP)
  int embedding_dim = 0;  // speaker embedding width appended to each row
};

std::vector<Tensor> ToTensors(const SequenceModel &model, const FrontEndMeta &meta = {});

DiagGmm UbmFromTensors(const std::vector<Tensor> &tensors);
TvMatrix TvFromTensors(const std::vector<Tensor> &tensors);
SvBackend SvFromTensors(const std::vector<Tensor> &tensors);
SequenceModel ModelFromTensors(const std::vector<Tensor> &tensors, FrontEndMeta *meta = nullptr);

void SaveUbm(const std::string &path, const DiagGmm &ubm);
DiagGmm LoadUbm(const std::string &path);
void SaveTv(const std::string &path, const TvMatrix &tv);
TvMatrix LoadTv(const std::string &path);
void SaveSv(const std::string &path, const SvBackend &sv);
SvBackend LoadSv(const std::string &path);
void SaveModel(const std::string &path, const SequenceModel &model, const FrontEndMeta &meta = {});
SequenceModel LoadModel(const std::string &path, FrontEndMeta *meta = nullptr);

}  // namespace sdvad

#endif  // SDVAD_SERIALIZE_H_
