// src/serialize.cc

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


#include "sdvad/serialize.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace sdvad {

namespace {

void PutU8(std::string *out, std::uint8_t v) { out->push_back(static_cast<char>(v)); }
void PutU16(std::string *out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU32(std::string *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string &bytes, const std::string &source) : bytes_(bytes), source_(source) {}

  const unsigned char *Take(std::size_t n, const std::string &what) {
    if (pos_ + n > bytes_.size())
      Fail("truncated: need " + std::to_string(n) + " bytes for " + what + ", " +
           std::to_string(bytes_.size() - pos_) + " left");
    const auto *p = reinterpret_cast<const unsigned char *>(bytes_.data()) + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t U8(const std::string &what) { return *Take(1, what); }
  std::uint16_t U16(const std::string &what) {
    const auto *p = Take(2, what);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t U32(const std::string &what) {
    const auto *p = Take(4, what);
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
  }
  std::size_t Offset() const { return pos_; }
  bool AtEnd() const { return pos_ == bytes_.size(); }
  [[noreturn]] void Fail(const std::string &msg) const {
    throw FormatError(source_ + ": " + msg + " (at byte offset " + std::to_string(pos_) + ")");
  }

 private:
  const std::string &bytes_;
  const std::string &source_;
  std::size_t pos_ = 0;
};

Tensor MakeTensor(const std::string &name, std::vector<std::uint32_t> dims, const double *data) {
  Tensor t{name, std::move(dims), {}};
  std::size_t n = 1;
  for (auto d : t.dims) n *= d;
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.values[i] = static_cast<float>(data[i]);
  return t;
}

Tensor FromMatrix(const std::string &name, const Matrix &m) {
  return MakeTensor(name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                    m.data());
}

Tensor FromVector(const std::string &name, const Vector &v) {
  return MakeTensor(name, {static_cast<std::uint32_t>(v.size())}, v.data());
}

class TensorMap {
 public:
  TensorMap(const std::vector<Tensor> &tensors, const std::string &prefix) : prefix_(prefix) {
    for (const auto &t : tensors) {
      if (t.name.rfind(prefix, 0) != 0)
        throw FormatError("tensor '" + t.name + "' does not belong to a '" + prefix + "' model");
      map_[t.name] = &t;
    }
  }
  bool Has(const std::string &name) const { return map_.count(prefix_ + name) > 0; }
  const Tensor &Get(const std::string &name, std::size_t rank) const {
    auto it = map_.find(prefix_ + name);
    if (it == map_.end()) throw FormatError("missing tensor '" + prefix_ + name + "'");
    if (it->second->dims.size() != rank)
      throw FormatError("tensor '" + prefix_ + name + "' has rank " +
                        std::to_string(it->second->dims.size()) + ", expected " + std::to_string(rank));
    return *it->second;
  }
  Matrix GetMatrix(const std::string &name) const {
    const Tensor &t = Get(name, 2);
    Matrix m(t.dims[0], t.dims[1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t.values[i];
    return m;
  }
  Vector GetVector(const std::string &name) const {
    const Tensor &t = Get(name, 1);
    Vector v(t.dims[0]);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.values[i];
    return v;
  }

 private:
  std::string prefix_;
  std::map<std::string, const Tensor *> map_;
};

void Expect(bool ok, const std::string &msg) {
  if (!ok) throw FormatError(msg);
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file " + path);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

std::string EncodeTensors(const std::vector<Tensor> &tensors) {
  std::string out(kModelMagic, 4);
  PutU32(&out, kModelVersion);
  PutU32(&out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto &t : tensors) {
    if (t.name.size() > 0xffff || t.dims.size() > 0xff)
      throw ContractError("tensor '" + t.name + "' name or rank too large");
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.values.size()) throw ContractError("tensor '" + t.name + "' dims do not match values");
    PutU16(&out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    PutU8(&out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) PutU32(&out, d);
    for (float f : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      PutU32(&out, bits);
    }
  }
  return out;
}

std::vector<Tensor> DecodeTensors(const std::string &bytes, const std::string &source) {
  Reader r(bytes, source);
  const unsigned char *magic = r.Take(4, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0)
    throw FormatError(source + ": bad magic, expected \"SDVD\" (at byte offset 0)");
  const std::uint32_t version = r.U32("version");
  if (version != kModelVersion)
    r.Fail("unsupported version " + std::to_string(version) + ", expected " +
           std::to_string(kModelVersion));
  const std::uint32_t count = r.U32("tensor count");
  std::vector<Tensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string what = "tensor " + std::to_string(k);
    Tensor t;
    const std::uint16_t name_len = r.U16(what + " name length");
    const auto *name = r.Take(name_len, what + " name");
    t.name.assign(reinterpret_cast<const char *>(name), name_len);
    const std::uint8_t rank = r.U8(what + " rank");
    std::uint64_t n = 1;
    for (int i = 0; i < rank; ++i) {
      t.dims.push_back(r.U32(what + " dims"));
      n *= t.dims.back();
    }
    if (n * 4 > bytes.size() - r.Offset())
      r.Fail("truncated: tensor '" + t.name + "' declares " + std::to_string(n) +
             " values but the file is too short");
    t.values.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      std::uint32_t bits = r.U32(what + " values");
      std::memcpy(&t.values[i], &bits, 4);
      if (!std::isfinite(t.values[i])) r.Fail("non-finite value in tensor '" + t.name + "'");
    }
    tensors.push_back(std::move(t));
  }
  if (!r.AtEnd()) r.Fail("trailing bytes after last tensor");
  return tensors;
}

void WriteTensorFile(const std::string &path, const std::vector<Tensor> &tensors) {
  const std::string bytes = EncodeTensors(tensors);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write model file " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed for " + path);
}

std::vector<Tensor> ReadTensorFile(const std::string &path) {
  return DecodeTensors(Slurp(path), path);
}

std::vector<Tensor> ToTensors(const DiagGmm &ubm) {
  return {FromVector("ubm.weights", ubm.weights), FromMatrix("ubm.means", ubm.means),
          FromMatrix("ubm.vars", ubm.vars)};
}

std::vector<Tensor> ToTensors(const TvMatrix &tv) {
  const auto c = static_cast<std::uint32_t>(tv.NumComponents());
  const auto f = c ? static_cast<std::uint32_t>(tv.blocks[0].rows()) : 0u;
  const auto d = static_cast<std::uint32_t>(tv.IvectorDim());
  std::vector<double> flat;
  for (const auto &b : tv.blocks) flat.insert(flat.end(), b.data(), b.data() + b.size());
  return {MakeTensor("tv.blocks", {c, f, d}, flat.data())};
}

std::vector<Tensor> ToTensors(const SvBackend &sv) {
  Vector thr(1);
  thr[0] = sv.threshold;
  return {FromVector("plda.mean", sv.plda.mean), FromMatrix("plda.between", sv.plda.between),
          FromMatrix("plda.within", sv.plda.within), FromVector("plda.threshold", thr)};
}

namespace {

Tensor MetaTensor(const std::string &kind, const FrontEndMeta &meta) {
  const double v[3] = {double(meta.bin), double(meta.context), double(meta.embedding_dim)};
  return MakeTensor(kind + ".meta", {3}, v);
}

FrontEndMeta ReadMeta(const TensorMap &m, const std::string &kind) {
  const Tensor &t = m.Get("meta", 1);
  Expect(t.values.size() == 3, kind + ".meta must hold 3 values");
  FrontEndMeta meta{static_cast<int>(t.values[0]), static_cast<int>(t.values[1]),
                    static_cast<int>(t.values[2])};
  Expect(meta.bin >= 1 && meta.context >= 0 && meta.embedding_dim >= 0,
         kind + ".meta holds invalid values");
  return meta;
}

}  // namespace

std::vector<Tensor> ToTensors(const SequenceModel &model, const FrontEndMeta &meta) {
  std::vector<Tensor> out;
  if (const auto *mlp = std::get_if<MlpModel>(&model)) {
    out.push_back(MetaTensor("mlp", meta));
    out.push_back(FromVector("mlp.norm.shift", mlp->norm.shift));
    out.push_back(FromVector("mlp.norm.scale", mlp->norm.scale));
    for (std::size_t l = 0; l < mlp->layers.size(); ++l) {
      const std::string p = "mlp.layer" + std::to_string(l);
      out.push_back(FromMatrix(p + ".w", mlp->layers[l].w));
      out.push_back(FromVector(p + ".b", mlp->layers[l].b));
    }
    return out;
  }
  const auto &lstm = std::get<LstmModel>(model);
  out.push_back(MetaTensor("lstm", meta));
  out.push_back(FromVector("lstm.norm.shift", lstm.norm.shift));
  out.push_back(FromVector("lstm.norm.scale", lstm.norm.scale));
  for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
    const std::string p = "lstm.layer" + std::to_string(l);
    out.push_back(FromMatrix(p + ".w", lstm.layers[l].w));
    out.push_back(FromMatrix(p + ".u", lstm.layers[l].u));
    out.push_back(FromVector(p + ".b", lstm.layers[l].b));
  }
  out.push_back(FromMatrix("lstm.out.w", lstm.out.w));
  out.push_back(FromVector("lstm.out.b", lstm.out.b));
  return out;
}

DiagGmm UbmFromTensors(const std::vector<Tensor> &tensors) {
  TensorMap m(tensors, "ubm.");
  DiagGmm g{m.GetVector("weights"), m.GetMatrix("means"), m.GetMatrix("vars")};
  Expect(g.means.rows() == g.weights.size() && g.vars.rows() == g.weights.size() &&
             g.vars.cols() == g.means.cols(),
         "ubm: inconsistent tensor shapes");
  Expect((g.vars.array() > 0).all(), "ubm: non-positive variance");
  return g;
}

TvMatrix TvFromTensors(const std::vector<Tensor> &tensors) {
  TensorMap m(tensors, "tv.");
  const Tensor &t = m.Get("blocks", 3);
  TvMatrix tv;
  const std::size_t block = std::size_t(t.dims[1]) * t.dims[2];
  Expect(t.dims[2] >= 1, "tv: i-vector dimension must be >= 1");
  for (std::uint32_t c = 0; c < t.dims[0]; ++c) {
    Matrix b(t.dims[1], t.dims[2]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = t.values[c * block + i];
    tv.blocks.push_back(std::move(b));
  }
  return tv;
}

SvBackend SvFromTensors(const std::vector<Tensor> &tensors) {
  TensorMap m(tensors, "plda.");
  SvBackend sv;
  sv.plda.mean = m.GetVector("mean");
  sv.plda.between = m.GetMatrix("between");
  sv.plda.within = m.GetMatrix("within");
  const Eigen::Index d = sv.plda.mean.size();
  Expect(sv.plda.between.rows() == d && sv.plda.between.cols() == d && sv.plda.within.rows() == d &&
             sv.plda.within.cols() == d,
         "plda: covariance shapes disagree with the mean");
  const Vector thr = m.GetVector("threshold");
  Expect(thr.size() == 1, "plda: threshold must hold one value");
  sv.threshold = thr[0];
  return sv;
}

SequenceModel ModelFromTensors(const std::vector<Tensor> &tensors, FrontEndMeta *meta) {
  Expect(!tensors.empty(), "model file holds no tensors");
  const std::string &first = tensors[0].name;
  if (first.rfind("mlp.", 0) == 0) {
    TensorMap m(tensors, "mlp.");
    MlpModel mlp;
    mlp.norm = {m.GetVector("norm.shift"), m.GetVector("norm.scale")};
    Expect(mlp.norm.scale.size() == mlp.norm.shift.size(), "mlp: normaliser shapes differ");
    Eigen::Index in = mlp.norm.shift.size();
    for (int l = 0; m.Has("layer" + std::to_string(l) + ".w"); ++l) {
      const std::string p = "layer" + std::to_string(l);
      DenseLayer layer{m.GetMatrix(p + ".w"), m.GetVector(p + ".b")};
      Expect(layer.w.cols() == in && layer.b.size() == layer.w.rows(),
             "mlp: layer " + std::to_string(l) + " shape does not chain");
      in = layer.w.rows();
      mlp.layers.push_back(std::move(layer));
    }
    Expect(!mlp.layers.empty() && in == 2, "mlp: output layer must have 2 units");
    Expect(tensors.size() == 3 + 2 * mlp.layers.size(), "mlp: unexpected extra tensors");
    const FrontEndMeta read = ReadMeta(m, "mlp");
    if (meta) *meta = read;
    return mlp;
  }
  if (first.rfind("lstm.", 0) == 0) {
    TensorMap m(tensors, "lstm.");
    LstmModel lstm;
    lstm.norm = {m.GetVector("norm.shift"), m.GetVector("norm.scale")};
    Expect(lstm.norm.scale.size() == lstm.norm.shift.size(), "lstm: normaliser shapes differ");
    Eigen::Index in = lstm.norm.shift.size();
    for (int l = 0; m.Has("layer" + std::to_string(l) + ".w"); ++l) {
      const std::string p = "layer" + std::to_string(l);
      LstmLayer layer{m.GetMatrix(p + ".w"), m.GetMatrix(p + ".u"), m.GetVector(p + ".b")};
      const Eigen::Index h = layer.u.cols();
      Expect(layer.w.rows() == 4 * h && layer.w.cols() == in && layer.u.rows() == 4 * h &&
                 layer.b.size() == 4 * h,
             "lstm: layer " + std::to_string(l) + " gate shapes are inconsistent");
      in = h;
      lstm.layers.push_back(std::move(layer));
    }
    lstm.out = {m.GetMatrix("out.w"), m.GetVector("out.b")};
    Expect(!lstm.layers.empty() && lstm.out.w.rows() == 2 && lstm.out.w.cols() == in &&
               lstm.out.b.size() == 2,
           "lstm: output layer shape is inconsistent");
    Expect(tensors.size() == 5 + 3 * lstm.layers.size(), "lstm: unexpected extra tensors");
    const FrontEndMeta read = ReadMeta(m, "lstm");
    if (meta) *meta = read;
    return lstm;
  }
  throw FormatError("unknown model kind for tensor '" + first + "'");
}

void SaveUbm(const std::string &path, const DiagGmm &ubm) { WriteTensorFile(path, ToTensors(ubm)); }
DiagGmm LoadUbm(const std::string &path) { return UbmFromTensors(ReadTensorFile(path)); }
void SaveTv(const std::string &path, const TvMatrix &tv) { WriteTensorFile(path, ToTensors(tv)); }
TvMatrix LoadTv(const std::string &path) { return TvFromTensors(ReadTensorFile(path)); }
void SaveSv(const std::string &path, const SvBackend &sv) { WriteTensorFile(path, ToTensors(sv)); }
SvBackend LoadSv(const std::string &path) { return SvFromTensors(ReadTensorFile(path)); }
void SaveModel(const std::string &path, const SequenceModel &model, const FrontEndMeta &meta) {
  WriteTensorFile(path, ToTensors(model, meta));
}
SequenceModel LoadModel(const std::string &path, FrontEndMeta *meta) {
  return ModelFromTensors(ReadTensorFile(path), meta);
}

}  // namespace sdvad
