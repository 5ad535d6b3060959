// test_serialize.cc

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


#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "sdvad/serialize.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::RandomMatrix;
using sdvad::testing::RandomVector;
using sdvad::testing::TempDir;

namespace {

template <typename M>
M Rounded(M m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
  return m;
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void Spit(const std::string &path, const std::string &bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

bool Same(const Matrix &a, const Matrix &b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

bool Same(const Vector &a, const Vector &b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("byte layout") {
  const std::string bytes = EncodeTensors({{"ab", {2}, {1.0f, -2.0f}}});
  const std::string expected = std::string("SDVD") + std::string("\x01\0\0\0", 4) +
                               std::string("\x01\0\0\0", 4) + std::string("\x02\0", 2) + "ab" +
                               std::string("\x01", 1) + std::string("\x02\0\0\0", 4) +
                               std::string("\x00\x00\x80\x3f", 4) + std::string("\x00\x00\x00\xc0", 4);
  CHECK(bytes == expected);
  const auto back = DecodeTensors(bytes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].name == "ab");
  CHECK(back[0].values == std::vector<float>{1.0f, -2.0f});
}

TEST_CASE("round trips are bit-exact for every model kind") {
  TempDir dir("ser");
  std::mt19937_64 rng(1);

  DiagGmm ubm{Rounded(Vector(RandomVector(rng, 4).cwiseAbs())), Rounded(RandomMatrix(rng, 4, 3)),
              Rounded(Matrix(RandomMatrix(rng, 4, 3).cwiseAbs().array() + 0.1))};
  SaveUbm(dir / "ubm.mdl", ubm);
  const DiagGmm u2 = LoadUbm(dir / "ubm.mdl");
  CHECK(Same(u2.weights, ubm.weights));
  CHECK(Same(u2.means, ubm.means));
  CHECK(Same(u2.vars, ubm.vars));

  TvMatrix tv;
  for (int c = 0; c < 4; ++c) tv.blocks.push_back(Rounded(RandomMatrix(rng, 3, 5)));
  SaveTv(dir / "tv.mdl", tv);
  const TvMatrix t2 = LoadTv(dir / "tv.mdl");
  REQUIRE(t2.blocks.size() == 4);
  for (int c = 0; c < 4; ++c) CHECK(Same(t2.blocks[c], tv.blocks[c]));

  SvBackend sv{{Rounded(RandomVector(rng, 5)), Rounded(RandomMatrix(rng, 5, 5)),
                Rounded(RandomMatrix(rng, 5, 5))},
               -1.25};
  SaveSv(dir / "sv.mdl", sv);
  const SvBackend s2 = LoadSv(dir / "sv.mdl");
  CHECK(Same(s2.plda.mean, sv.plda.mean));
  CHECK(Same(s2.plda.between, sv.plda.between));
  CHECK(Same(s2.plda.within, sv.plda.within));
  CHECK(s2.threshold == sv.threshold);

  SequenceModel mlp = InitMlp(6, {5, 4}, 3);
  RoundToFloat(&mlp);
  SaveModel(dir / "mlp.mdl", mlp, {1, 2, 3});
  FrontEndMeta meta;
  SequenceModel m2 = LoadModel(dir / "mlp.mdl", &meta);
  CHECK(meta.bin == 1);
  CHECK(meta.context == 2);
  CHECK(meta.embedding_dim == 3);
  const auto &a = std::get<MlpModel>(mlp), &b = std::get<MlpModel>(m2);
  REQUIRE(b.layers.size() == 3);
  CHECK(Same(a.norm.shift, b.norm.shift));
  for (int l = 0; l < 3; ++l) {
    CHECK(Same(a.layers[l].w, b.layers[l].w));
    CHECK(Same(a.layers[l].b, b.layers[l].b));
  }

  SequenceModel lstm = InitLstm(7, 3, 2, 4);
  RoundToFloat(&lstm);
  SaveModel(dir / "lstm.mdl", lstm, {4, 0, 2});
  SequenceModel l2 = LoadModel(dir / "lstm.mdl", &meta);
  CHECK(meta.bin == 4);
  const auto &c = std::get<LstmModel>(lstm), &d = std::get<LstmModel>(l2);
  REQUIRE(d.layers.size() == 2);
  for (int l = 0; l < 2; ++l) {
    CHECK(Same(c.layers[l].w, d.layers[l].w));
    CHECK(Same(c.layers[l].u, d.layers[l].u));
    CHECK(Same(c.layers[l].b, d.layers[l].b));
  }
  CHECK(Same(c.out.w, d.out.w));
  CHECK(Same(c.norm.scale, d.norm.scale));

  // Load then save reproduces the file byte for byte.
  SaveModel(dir / "lstm2.mdl", l2, meta);
  CHECK(Slurp(dir / "lstm2.mdl") == Slurp(dir / "lstm.mdl"));
}

TEST_CASE("corrupted files are rejected with format errors") {
  TempDir dir("corrupt");
  SequenceModel lstm = InitLstm(3, 2, 1, 1);
  SaveModel(dir / "ok.mdl", lstm);
  const std::string good = Slurp(dir / "ok.mdl");

  std::string bad = good;
  bad[0] = 'X';
  Spit(dir / "magic.mdl", bad);
  try {
    LoadModel(dir / "magic.mdl");
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    CHECK(std::string(e.what()).find("SDVD") != std::string::npos);
  }

  bad = good;
  bad[4] = 2;
  Spit(dir / "version.mdl", bad);
  CHECK_THROWS_AS(LoadModel(dir / "version.mdl"), FormatError);

  for (std::size_t cut : {std::size_t{2}, std::size_t{9}, good.size() / 2, good.size() - 1}) {
    Spit(dir / "trunc.mdl", good.substr(0, cut));
    try {
      LoadModel(dir / "trunc.mdl");
      FAIL("expected FormatError");
    } catch (const FormatError &e) {
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }

  Spit(dir / "trail.mdl", good + "x");
  CHECK_THROWS_AS(LoadModel(dir / "trail.mdl"), FormatError);

  // Shape errors: drop a tensor, or mislabel a file's kind.
  auto tensors = ReadTensorFile(dir / "ok.mdl");
  auto missing = tensors;
  missing.pop_back();
  WriteTensorFile(dir / "missing.mdl", missing);
  CHECK_THROWS_AS(LoadModel(dir / "missing.mdl"), FormatError);
  auto reshaped = tensors;
  reshaped[3].dims = {static_cast<std::uint32_t>(reshaped[3].values.size()), 1};
  WriteTensorFile(dir / "shape.mdl", reshaped);
  CHECK_THROWS_AS(LoadModel(dir / "shape.mdl"), FormatError);
  CHECK_THROWS_AS(LoadUbm(dir / "ok.mdl"), FormatError);
  CHECK_THROWS_AS(LoadModel(dir / "absent.mdl"), DataError);

  float nan = std::numeric_limits<float>::quiet_NaN();
  tensors[1].values[0] = nan;
  WriteTensorFile(dir / "nan.mdl", tensors);
  CHECK_THROWS_AS(LoadModel(dir / "nan.mdl"), FormatError);
}

}  // TEST_SUITE
