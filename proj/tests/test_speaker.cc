// test_speaker.cc

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
#include <numbers>
#include <random>

#include <doctest.h>

#include "sdvad/speaker.h"
#include "test_util.h"

using namespace sdvad;
using sdvad::testing::RandomMatrix;
using sdvad::testing::RandomVector;

namespace {

FeatureMatrix Feats(const Matrix &m) {
  FeatureMatrix f;
  f.values = m;
  return f;
}

DiagGmm SeparatedGmm() {
  DiagGmm g;
  g.weights = Vector::Constant(3, 1.0 / 3);
  g.means.resize(3, 2);
  g.means << -20, 0, 0, 20, 20, 0;
  g.vars = Matrix::Ones(3, 2);
  return g;
}

// Log N(x; 0, S) evaluated densely.
double LogGauss(const Vector &x, const Matrix &s) {
  Eigen::LLT<Matrix> llt(s);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (x.size() * std::log(2 * std::numbers::pi) + logdet + x.dot(llt.solve(x)));
}

Matrix RandomSpd(std::mt19937_64 &rng, int d, double ridge) {
  const Matrix a = RandomMatrix(rng, d, d);
  return a * a.transpose() + ridge * Matrix::Identity(d, d);
}

// Draws samples from N(0, cov).
Vector Draw(std::mt19937_64 &rng, const Matrix &chol_l) {
  return chol_l * RandomVector(rng, chol_l.rows());
}

}  // namespace

TEST_SUITE("speaker") {

TEST_CASE("UBM with one component is the global Gaussian") {
  std::mt19937_64 rng(1);
  const Matrix x = RandomMatrix(rng, 500, 3, 2.0).array() + 1.5;
  UbmOptions opts;
  opts.num_components = 1;
  opts.num_iters = 3;
  const DiagGmm g = TrainUbm({Feats(x)}, opts);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
  CHECK((g.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((g.vars.row(0) - var).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(g.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("UBM separates two clusters; deterministic; monotone") {
  std::mt19937_64 rng(2);
  Matrix x(800, 2);
  Eigen::RowVector2d m0 = Eigen::RowVector2d::Zero(), m1 = Eigen::RowVector2d::Zero();
  std::normal_distribution<double> g;
  for (int t = 0; t < 800; ++t) {
    const bool second = t % 2;
    x(t, 0) = (second ? 8.0 : -8.0) + g(rng);
    x(t, 1) = (second ? 3.0 : 0.0) + g(rng);
    (second ? m1 : m0) += x.row(t);
  }
  m0 /= 400.0;
  m1 /= 400.0;
  UbmOptions opts;
  opts.num_components = 2;
  opts.num_iters = 10;
  std::vector<double> trace;
  const DiagGmm a = TrainUbm({Feats(x)}, opts, &trace);
  const int i0 = a.means(0, 0) < 0 ? 0 : 1;
  CHECK((a.means.row(i0) - m0).norm() < 0.1);
  CHECK((a.means.row(1 - i0) - m1).norm() < 0.1);
  CHECK(trace.size() == 11);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-8);
  const DiagGmm b = TrainUbm({Feats(x)}, opts);
  CHECK((a.means.array() == b.means.array()).all());
  CHECK((a.vars.array() == b.vars.array()).all());
  CHECK(a.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("UBM input errors") {
  UbmOptions opts;
  opts.num_components = 4;
  CHECK_THROWS_AS(TrainUbm({Feats(Matrix::Zero(39, 2))}, opts), DataError);
  Matrix bad = Matrix::Ones(100, 2);
  bad(5, 1) = std::nan("");
  CHECK_THROWS_AS(TrainUbm({Feats(bad)}, opts), DataError);
}

TEST_CASE("Baum-Welch statistics") {
  const DiagGmm ubm = SeparatedGmm();
  Matrix at_mean(1, 2);
  at_mean << 0, 20;
  const BwStats one = ComputeBwStats(at_mean, ubm);
  CHECK(one.occupancy[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one.first.cwiseAbs().maxCoeff() < 1e-12);
  const BwStats empty = ComputeBwStats(Matrix(0, 2), ubm);
  CHECK(empty.occupancy.isZero(0));
  CHECK(empty.first.isZero(0));
  CHECK_THROWS_AS(ComputeBwStats(Matrix::Zero(3, 3), ubm), ContractError);

  std::mt19937_64 rng(3);
  DiagGmm g;
  g.weights = Vector::Constant(4, 0.25);
  g.means = RandomMatrix(rng, 4, 3);
  g.vars = (RandomMatrix(rng, 4, 3).array().abs() + 0.5).matrix();
  const Matrix x = RandomMatrix(rng, 60, 3, 1.5);
  const BwStats s = ComputeBwStats(x, g);
  Vector n = Vector::Zero(4);
  Matrix f = Matrix::Zero(4, 3);
  for (int t = 0; t < 60; ++t) {
    std::vector<double> ll(4);
    for (int c = 0; c < 4; ++c) {
      double v = std::log(g.weights[c]);
      for (int d = 0; d < 3; ++d)
        v += -0.5 * std::log(2 * std::numbers::pi * g.vars(c, d)) -
             0.5 * std::pow(x(t, d) - g.means(c, d), 2) / g.vars(c, d);
      ll[c] = v;
    }
    const double mx = *std::max_element(ll.begin(), ll.end());
    double z = 0;
    for (double v : ll) z += std::exp(v - mx);
    for (int c = 0; c < 4; ++c) {
      const double gamma = std::exp(ll[c] - mx) / z;
      n[c] += gamma;
      f.row(c) += gamma * (x.row(t) - g.means.row(c));
    }
  }
  CHECK((s.occupancy - n).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.first - f).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(s.TotalOccupancy() == doctest::Approx(60.0).epsilon(1e-12));
}

TEST_CASE("i-vector closed forms") {
  DiagGmm ubm;
  ubm.weights = Vector::Ones(1);
  ubm.means = Matrix::Zero(1, 1);
  ubm.vars = Matrix::Constant(1, 1, 2.5);
  TvMatrix tv;
  tv.blocks = {Matrix::Constant(1, 1, 0.7)};
  for (double n : {0.0, 1.0, 13.0})
    for (double fv : {-3.0, 0.5, 8.0}) {
      BwStats s(1, 1);
      s.occupancy[0] = n;
      s.first(0, 0) = fv;
      const double oracle = 0.7 * fv / (2.5 + n * 0.49);
      CHECK(ExtractIvector(s, tv, ubm).values[0] == doctest::Approx(oracle).epsilon(1e-12));
      // Doubling N and F keeps the sign of w.
      BwStats d2 = s;
      d2.Scale(2.0);
      const double w2 = ExtractIvector(d2, tv, ubm).values[0];
      CHECK((w2 > 0) == (oracle > 0));
      CHECK(w2 == doctest::Approx(0.7 * 2 * fv / (2.5 + 2 * n * 0.49)).epsilon(1e-12));
    }
  BwStats zero(1, 1);
  CHECK(ExtractIvector(zero, tv, ubm).values[0] == 0.0);

  std::mt19937_64 rng(4);
  DiagGmm u2 = SeparatedGmm();
  TvMatrix zt;
  zt.blocks.assign(3, Matrix::Zero(2, 4));
  BwStats s = ComputeBwStats(RandomMatrix(rng, 30, 2, 10.0), u2);
  CHECK(ExtractIvector(s, zt, u2).values.isZero(0));
  TvMatrix rt;
  for (int c = 0; c < 3; ++c) rt.blocks.push_back(RandomMatrix(rng, 2, 4));
  BwStats zf = s;
  zf.first.setZero();
  CHECK(ExtractIvector(zf, rt, u2).values.isZero(0));
  const IVector a = ExtractIvector(s, rt, u2), b = ExtractIvector(s, rt, u2);
  CHECK((a.values.array() == b.values.array()).all());
  BwStats bad = s;
  bad.first(0, 0) = std::nan("");
  CHECK_THROWS_AS(ExtractIvector(bad, rt, u2), DataError);
}

TEST_CASE("TV training recovers a one-factor model; objective monotone; deterministic") {
  std::mt19937_64 rng(5);
  const int num_c = 2, dim = 3, utts = 400;
  DiagGmm ubm;
  ubm.weights = Vector::Constant(num_c, 0.5);
  ubm.means = Matrix::Zero(num_c, dim);
  ubm.vars = Matrix::Ones(num_c, dim);
  Matrix t_true(num_c * dim, 1);
  t_true << 1.0, -0.5, 0.8, 0.3, 1.2, -0.9;
  std::normal_distribution<double> g;
  std::vector<BwStats> stats;
  std::vector<double> w_true;
  for (int u = 0; u < utts; ++u) {
    const double w = g(rng);
    w_true.push_back(w);
    BwStats s(num_c, dim);
    for (int c = 0; c < num_c; ++c) {
      const double n = 40.0;
      s.occupancy[c] = n;
      for (int f = 0; f < dim; ++f) s.first(c, f) = n * t_true(c * dim + f, 0) * w + std::sqrt(n) * g(rng);
    }
    stats.push_back(s);
  }
  // Least-squares fit of F = N t w given the true factors.
  double num_w = 0.0;
  Vector ls = Vector::Zero(num_c * dim);
  for (int u = 0; u < utts; ++u) {
    num_w += 40.0 * w_true[u] * w_true[u];
    for (int c = 0; c < num_c; ++c)
      for (int f = 0; f < dim; ++f) ls[c * dim + f] += stats[u].first(c, f) * w_true[u];
  }
  ls /= num_w;

  TvOptions opts;
  opts.ivector_dim = 1;
  opts.num_iters = 20;
  std::vector<double> trace;
  const TvMatrix tv = TrainTv(stats, ubm, opts, &trace);
  Vector est(num_c * dim);
  for (int c = 0; c < num_c; ++c)
    for (int f = 0; f < dim; ++f) est[c * dim + f] = tv.blocks[c](f, 0);
  if (est.dot(ls) < 0) est = -est;
  CHECK((est - ls).norm() / ls.norm() < 0.10);
  REQUIRE(trace.size() == 21);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-8);
  const TvMatrix again = TrainTv(stats, ubm, opts);
  for (int c = 0; c < num_c; ++c) CHECK((again.blocks[c].array() == tv.blocks[c].array()).all());
  CHECK(TvObjective(stats, ubm, tv) == doctest::Approx(trace.back()).epsilon(1e-12));

  opts.ivector_dim = 500;
  CHECK_THROWS_AS(TrainTv(stats, ubm, opts), DataError);
}

TEST_CASE("TV singular accumulator reports the component") {
  DiagGmm ubm;
  ubm.weights = Vector::Constant(2, 0.5);
  ubm.means = Matrix::Zero(2, 1);
  ubm.vars = Matrix::Ones(2, 1);
  std::vector<BwStats> stats(3, BwStats(2, 1));
  for (auto &s : stats) s.occupancy[0] = 5.0, s.first(0, 0) = 1.0;
  TvOptions opts;
  opts.ivector_dim = 1;
  opts.num_iters = 2;
  try {
    TrainTv(stats, ubm, opts);
    FAIL("expected a numerical error");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("component 1") != std::string::npos);
  }
}

TEST_CASE("length normalisation and cosine scoring") {
  Vector v(2);
  v << 3, 4;
  const IVector n = LengthNormalize({v, false});
  CHECK(n.normalized);
  CHECK(n.values[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n.values[1] == doctest::Approx(0.8).epsilon(1e-15));
  const IVector nn = LengthNormalize(n);
  CHECK((nn.values - n.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(LengthNormalize({Vector::Zero(3), false}), NumericalError);
  Vector a(2), b(2);
  a << 1, 2;
  b << -2, 1;
  CHECK(CosineScore({a}, {a}) == doctest::Approx(1.0));
  CHECK(std::abs(CosineScore({a}, {b})) < 1e-15);
  CHECK(CosineScore({a}, {Vector(-a)}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(CosineScore({a}, {Vector::Zero(2)}), NumericalError);
}

TEST_CASE("PLDA training special cases") {
  Vector u(3);
  u << 1, 2, -1;
  std::vector<IVector> same;
  std::vector<std::string> spk;
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 3; ++i) {
      same.push_back({s == 0 ? Vector(u) : Vector(-u)});
      spk.push_back(s == 0 ? "a" : "b");
    }
  const PldaModel m = TrainPlda(same, spk);
  CHECK((m.within - 1e-6 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.between);
  CHECK(es.eigenvalues()[1] < 1e-5);
  const Vector top = es.eigenvectors().col(2);
  CHECK(std::abs(top.dot(u.normalized())) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(TrainPlda({{u}, {u}}, {"a", "a"}), DataError);
  CHECK_THROWS_AS(TrainPlda({{u}, {Vector(-u)}}, {"a", "b"}), DataError);
}

TEST_CASE("PLDA recovers simulated covariances within 15%") {
  std::mt19937_64 rng(6);
  const int d = 3, speakers = 500, per = 200;
  const Matrix b_true = RandomSpd(rng, d, 0.5), w_true = RandomSpd(rng, d, 0.5);
  const Matrix lb = b_true.llt().matrixL(), lw = w_true.llt().matrixL();
  std::vector<IVector> vecs;
  std::vector<std::string> labels;
  for (int s = 0; s < speakers; ++s) {
    const Vector y = Draw(rng, lb);
    for (int i = 0; i < per; ++i) {
      vecs.push_back({Vector(y + Draw(rng, lw))});
      labels.push_back("s" + std::to_string(s));
    }
  }
  const PldaModel m = TrainPlda(vecs, labels);
  CHECK((m.between - b_true).norm() / b_true.norm() < 0.15);
  CHECK((m.within - w_true).norm() / w_true.norm() < 0.15);
}

TEST_CASE("PLDA score matches the dense two-hypothesis Gaussian oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 4;
    PldaModel m{RandomVector(rng, d), RandomSpd(rng, d, 0.2), RandomSpd(rng, d, 0.2)};
    const PldaScorer scorer(m);
    for (int k = 0; k < 5; ++k) {
      const Vector a = RandomVector(rng, d, 2.0), b = RandomVector(rng, d, 2.0);
      Vector joint(2 * d);
      joint << a - m.mean, b - m.mean;
      const Matrix tot = m.between + m.within;
      Matrix same(2 * d, 2 * d), diff = Matrix::Zero(2 * d, 2 * d);
      same << tot, m.between, m.between, tot;
      diff.topLeftCorner(d, d) = tot;
      diff.bottomRightCorner(d, d) = tot;
      const double oracle = LogGauss(joint, same) - LogGauss(joint, diff);
      const double s = scorer.Score(a, b);
      CHECK(s == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(std::abs(s - scorer.Score(b, a)) < 1e-9);
    }
  }
  PldaModel flat{Vector::Zero(2), Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  const PldaScorer fs(flat);
  const double c0 = fs.Score(Vector::Zero(2), Vector::Ones(2));
  for (int k = 0; k < 10; ++k)
    CHECK(std::abs(fs.Score(RandomVector(rng, 2), RandomVector(rng, 2)) - c0) < 1e-12);
  CHECK_THROWS_AS(fs.Score(Vector::Zero(2), Vector::Zero(3)), ContractError);
}

TEST_CASE("PLDA prefers the same vector over a distant one") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 3;
    PldaModel m{Vector::Zero(d), RandomSpd(rng, d, 0.5), RandomSpd(rng, d, 0.5)};
    const Vector a = RandomVector(rng, d);
    const Vector b = a + RandomVector(rng, d).normalized() * 20.0;
    CHECK(PldaScore(m, {a}, {a}) >= PldaScore(m, {a}, {b}));
  }
}

TEST_CASE("EER threshold") {
  double eer = 1.0;
  const double thr = EerThreshold({3.0, 4.0, 5.0}, {0.0, 1.0, 2.0}, &eer);
  CHECK(thr == doctest::Approx(2.5));
  CHECK(eer == 0.0);
  const double thr2 = EerThreshold({1.0, 3.0, 5.0, 7.0}, {0.0, 2.0, 4.0, 6.0}, &eer);
  CHECK(thr2 == doctest::Approx(3.5));
  CHECK(eer == doctest::Approx(0.5));
  CHECK_THROWS_AS(EerThreshold({}, {1.0}), DataError);
}

}  // TEST_SUITE
