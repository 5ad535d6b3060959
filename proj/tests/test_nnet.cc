// test_nnet.cc

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


#include <cmath>
#include <random>

#include <doctest.h>

#include "sdvad/nnet.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::RandomLabels;
using sdvad::testing::RandomMatrix;
using sdvad::testing::RandomVector;

namespace {

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::pair<double, double> SoftmaxOracle(double z0, double z1) {
  const double e0 = std::exp(z0), e1 = std::exp(z1);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::vector<Sequence> RandomBatch(std::mt19937_64 &rng, int count, int dim, int max_len) {
  std::vector<Sequence> batch;
  for (int i = 0; i < count; ++i) {
    const int len = 1 + static_cast<int>(rng() % max_len);
    batch.push_back({RandomMatrix(rng, len, dim), RandomLabels(rng, len, 0.5)});
  }
  return batch;
}

void Perturb(std::mt19937_64 &rng, InputNorm *norm) {
  norm->shift = RandomVector(rng, norm->Dim(), 0.3);
  norm->scale = (RandomVector(rng, norm->Dim(), 0.2).array() + 1.0).matrix();
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("attach_speaker broadcasts the embedding") {
  FeatureMatrix f;
  f.values = Matrix::Ones(3, 2);
  const FeatureMatrix same = AttachSpeaker(f, Vector());
  CHECK((same.values.array() == f.values.array()).all());
  Vector e(2);
  e << 0.5, -2;
  const FeatureMatrix a = AttachSpeaker(f, e);
  REQUIRE(a.Dim() == 4);
  for (int t = 0; t < 3; ++t) CHECK((a.values.row(t).tail(2).transpose().array() == e.array()).all());
  f.values = Matrix::Zero(5, 36);
  CHECK(AttachSpeaker(f, Vector::Zero(200)).Dim() == 236);
}

TEST_CASE("MLP forward against a hand-rolled oracle") {
  MlpModel zero = InitMlp(3, {4}, 1);
  for (auto s : Parameters(zero)) std::fill(s.begin(), s.end(), 0.0);
  const double x3[3] = {1, -2, 3};
  auto [a0, a1] = MlpForwardRow(zero, x3);
  CHECK(a0 == 0.5);
  CHECK(a1 == 0.5);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    MlpModel m = InitMlp(2, {2}, 10 + trial);
    Perturb(rng, &m.norm);
    const Vector x = RandomVector(rng, 2);
    double in[2], h[2];
    for (int i = 0; i < 2; ++i) in[i] = (x[i] - m.norm.shift[i]) * m.norm.scale[i];
    for (int j = 0; j < 2; ++j) {
      double z = m.layers[0].b[j];
      for (int i = 0; i < 2; ++i) z += m.layers[0].w(j, i) * in[i];
      h[j] = std::tanh(z);
    }
    double z[2];
    for (int k = 0; k < 2; ++k) {
      z[k] = m.layers[1].b[k];
      for (int j = 0; j < 2; ++j) z[k] += m.layers[1].w(k, j) * h[j];
    }
    const auto oracle = SoftmaxOracle(z[0], z[1]);
    const auto [p0, p1] = MlpForwardRow(m, {x.data(), 2});
    CHECK(std::abs(p0 - oracle.first) < 1e-12);
    CHECK(std::abs(p1 - oracle.second) < 1e-12);
    CHECK(std::abs(p0 + p1 - 1.0) < 1e-9);
    CHECK(p0 > 0);
    CHECK(p1 > 0);
  }
  MlpModel m = InitMlp(2, {2}, 3);
  const double bad[3] = {0, 0, 0};
  CHECK_THROWS_AS(MlpForwardRow(m, bad), ContractError);
  // Equal output logits give equal posteriors whatever their value.
  m.layers[1].w.setZero();
  m.layers[1].b.setConstant(7.3);
  const auto [q0, q1] = MlpForwardRow(m, {x3, 2});
  CHECK(q0 == q1);
}

TEST_CASE("LSTM forward against per-gate scalar equations") {
  std::mt19937_64 rng(2);
  LstmModel m = InitLstm(2, 3, 1, 5);
  Perturb(rng, &m.norm);
  const Matrix x = RandomMatrix(rng, 4, 2);
  const Matrix post = LstmForward(m, x);
  const LstmLayer &l = m.layers[0];
  double h[3] = {0, 0, 0}, c[3] = {0, 0, 0};
  for (int t = 0; t < 4; ++t) {
    double in[2];
    for (int i = 0; i < 2; ++i) in[i] = (x(t, i) - m.norm.shift[i]) * m.norm.scale[i];
    double a[12];
    for (int r = 0; r < 12; ++r) {
      a[r] = l.b[r];
      for (int i = 0; i < 2; ++i) a[r] += l.w(r, i) * in[i];
      for (int j = 0; j < 3; ++j) a[r] += l.u(r, j) * h[j];
    }
    double hn[3];
    for (int k = 0; k < 3; ++k) {
      const double ig = Sig(a[k]), fg = Sig(a[3 + k]), og = Sig(a[6 + k]), g = std::tanh(a[9 + k]);
      c[k] = fg * c[k] + ig * g;
      hn[k] = og * std::tanh(c[k]);
    }
    std::copy(hn, hn + 3, h);
    double z[2];
    for (int o = 0; o < 2; ++o) {
      z[o] = m.out.b[o];
      for (int k = 0; k < 3; ++k) z[o] += m.out.w(o, k) * h[k];
    }
    const auto oracle = SoftmaxOracle(z[0], z[1]);
    CHECK(std::abs(post(t, 0) - oracle.first) < 1e-12);
    CHECK(std::abs(post(t, 1) - oracle.second) < 1e-12);
  }
  CHECK(LstmForward(m, Matrix(0, 2)).rows() == 0);
}

TEST_CASE("LSTM is causal and zero gates keep the state at zero") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    LstmModel m = InitLstm(3, 4, 1 + trial % 2, 20 + trial);
    const Matrix x = RandomMatrix(rng, 12, 3);
    const Matrix full = LstmForward(m, x);
    for (int k = 0; k < 12; ++k) {
      const Matrix pre = LstmForward(m, x.topRows(k + 1));
      CHECK((pre.array() == full.topRows(k + 1).array()).all());
    }
    for (int t = 0; t < 12; ++t) CHECK(std::abs(full.row(t).sum() - 1.0) < 1e-9);
  }
  LstmModel z = InitLstm(2, 3, 1, 1);
  z.layers[0].w.setZero();
  z.layers[0].u.setZero();
  z.layers[0].b.setZero();
  LstmState state = InitialState(z);
  const Matrix x = RandomMatrix(rng, 6, 2);
  const Matrix post = LstmForward(z, x);
  for (int t = 0; t < 6; ++t) {
    LstmStep(z, &state, {x.row(t).data(), 2});
    CHECK(state.h[0].isZero(0));
    CHECK(post(t, 1) == post(0, 1));
  }
}

TEST_CASE("cross entropy") {
  Matrix perfect(2, 2);
  perfect << 1, 0, 0, 1;
  CHECK(CrossEntropy(perfect, {0, 1}) == 0.0);
  CHECK(CrossEntropy(Matrix::Constant(3, 2, 0.5), {0, 1, 1}) == doctest::Approx(std::log(2.0)));
  Matrix quarter(2, 2);
  quarter << 0.25, 0.75, 0.75, 0.25;
  CHECK(CrossEntropy(quarter, {0, 1}) == doctest::Approx(std::log(4.0)));
  CHECK(CrossEntropy(perfect, {1, 0}) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(CrossEntropy(perfect, {1}), ContractError);
}

TEST_CASE("gradient check: random MLPs and LSTMs") {
  std::mt19937_64 rng(4);
  double worst_mlp = 0.0, worst_lstm = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + static_cast<int>(rng() % 6);
    std::vector<int> hidden;
    for (int l = 0; l < 1 + trial % 2; ++l) hidden.push_back(1 + static_cast<int>(rng() % 8));
    MlpModel m = InitMlp(in, hidden, 100 + trial);
    Perturb(rng, &m.norm);
    const auto batch = RandomBatch(rng, 2, in, 5);
    worst_mlp = std::max(worst_mlp, GradCheck(SequenceModel(m), batch, 1e-5));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + static_cast<int>(rng() % 5);
    LstmModel m = InitLstm(in, 1 + static_cast<int>(rng() % 6), 1 + trial % 2, 200 + trial);
    Perturb(rng, &m.norm);
    const auto batch = RandomBatch(rng, 2, in, 6);
    worst_lstm = std::max(worst_lstm, GradCheck(SequenceModel(m), batch, 1e-5));
  }
  CHECK(worst_mlp < 1e-4);
  CHECK(worst_lstm < 1e-4);
  MESSAGE("max relative gradient error: MLP " << worst_mlp << ", LSTM " << worst_lstm);
}

TEST_CASE("training steps: zero rate, determinism, separable convergence, divergence") {
  std::mt19937_64 rng(5);
  const auto batch = RandomBatch(rng, 3, 4, 8);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  LstmModel l = InitLstm(4, 5, 2, 1);
  const LstmModel before = l;
  TrainStep(&l, batch, cfg);
  CHECK((l.layers[1].u.array() == before.layers[1].u.array()).all());
  CHECK((l.out.w.array() == before.out.w.array()).all());

  cfg.learning_rate = 0.1;
  LstmModel a = InitLstm(4, 5, 2, 1), b = InitLstm(4, 5, 2, 1);
  for (int i = 0; i < 5; ++i) {
    TrainStep(&a, batch, cfg);
    TrainStep(&b, batch, cfg);
  }
  CHECK((a.layers[0].w.array() == b.layers[0].w.array()).all());

  // Two linearly separable frames.
  Matrix x(2, 2);
  x << 1, 1, -1, -1;
  std::vector<Sequence> sep{{x, {1, 0}}};
  MlpModel mlp = InitMlp(2, {4}, 7);
  cfg.learning_rate = 0.5;
  double loss = 1.0;
  for (int i = 0; i < 200; ++i) loss = TrainStep(&mlp, sep, cfg);
  CHECK(CrossEntropy(MlpForward(mlp, x), {1, 0}) < 0.01);
  CHECK(loss < 0.02);

  Matrix inf = Matrix::Constant(2, 2, std::numeric_limits<double>::infinity());
  std::vector<Sequence> bad{{inf, {1, 0}}};
  MlpModel m2 = InitMlp(2, {4}, 7);
  CHECK_THROWS_AS(TrainStep(&m2, bad, cfg), NumericalError);
}

TEST_CASE("Train: zero epochs leave the model alone; runs are reproducible") {
  std::mt19937_64 rng(6);
  std::vector<Sequence> data = RandomBatch(rng, 10, 3, 12);
  SequenceModel a = InitLstm(3, 4, 1, 9), b = InitLstm(3, 4, 1, 9);
  TrainConfig cfg;
  cfg.epochs = 0;
  Train(&a, data, cfg);
  CHECK((std::get<LstmModel>(a).layers[0].w.array() == std::get<LstmModel>(b).layers[0].w.array()).all());
  cfg.epochs = 3;
  cfg.batch_size = 3;
  std::vector<double> losses_a, losses_b;
  Train(&a, data, cfg, [&](const EpochReport &r) { losses_a.push_back(r.mean_loss); });
  Train(&b, data, cfg, [&](const EpochReport &r) { losses_b.push_back(r.mean_loss); });
  CHECK(losses_a == losses_b);
  CHECK(losses_a.size() == 3);
  CHECK((std::get<LstmModel>(a).out.w.array() == std::get<LstmModel>(b).out.w.array()).all());
}

TEST_CASE("input normalisation statistics") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 5, 3, 5;
  b << 5, 5, 7, 5;
  const InputNorm n = FitInputNorm({&a, &b});
  CHECK(n.shift[0] == doctest::Approx(4.0));
  CHECK(n.scale[0] == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(n.shift[1] == doctest::Approx(5.0));
  CHECK(n.scale[1] == 1.0);  // constant column is left unscaled
}

TEST_CASE("parameter counts and rounding to float") {
  SequenceModel m = InitMlp(10, {64, 64}, 1);
  CHECK(NumParameters(m) == (64 * 10 + 64) + (64 * 64 + 64) + (2 * 64 + 2));
  SequenceModel l = InitLstm(5, 8, 2, 1);
  CHECK(NumParameters(l) == (32 * 5 + 32 * 8 + 32) + (32 * 8 + 32 * 8 + 32) + (2 * 8 + 2));
  RoundToFloat(&l);
  for (auto s : Parameters(std::get<LstmModel>(l)))
    for (double v : s) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("per-epoch training data: called once per epoch, equal to fixed data when unchanged") {
  std::mt19937_64 rng(8);
  const auto data = RandomBatch(rng, 5, 3, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  SequenceModel fixed = InitLstm(3, 4, 1, 2), fed = fixed;
  Train(&fixed, data, cfg);
  std::vector<int> calls;
  Train(&fed, [&](int e) -> const std::vector<Sequence> & {
    calls.push_back(e);
    return data;
  }, cfg);
  CHECK(calls == std::vector<int>{0, 1, 2});
  const auto &a = std::get<LstmModel>(fixed), &b = std::get<LstmModel>(fed);
  CHECK((a.layers[0].w.array() == b.layers[0].w.array()).all());
  CHECK((a.out.w.array() == b.out.w.array()).all());
}

}  // TEST_SUITE
