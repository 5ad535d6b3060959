// src/kernels.cc

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


#include "sdvad/kernels.h"

#include <cmath>
#include <limits>
#include <numbers>

#include <omp.h>

namespace sdvad::kernels {

Matrix LogMelSerial(const MelBank &bank, const Matrix &frames) {
  Matrix out(frames.rows(), bank.NumMels());
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    bank.Compute({frames.row(t).data(), static_cast<std::size_t>(frames.cols())},
                 {out.row(t).data(), static_cast<std::size_t>(out.cols())});
  return out;
}

Matrix LogMelParallel(const MelBank &bank, const Matrix &frames) {
  Matrix out(frames.rows(), bank.NumMels());
  const Eigen::Index rows = frames.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < rows; ++t)
    bank.Compute({frames.row(t).data(), static_cast<std::size_t>(frames.cols())},
                 {out.row(t).data(), static_cast<std::size_t>(out.cols())});
  return out;
}

GmmAccumulator::GmmAccumulator(int num_components, int dim)
    : occupancy(Vector::Zero(num_components)),
      first(Matrix::Zero(num_components, dim)),
      second(Matrix::Zero(num_components, dim)) {}

void GmmAccumulator::Add(const GmmAccumulator &other) {
  loglik += other.loglik;
  occupancy += other.occupancy;
  first += other.first;
  second += other.second;
}

GmmEvaluator::GmmEvaluator(const DiagGmm &g)
    : gmm(g), log_consts(g.LogConsts()), inv_vars(g.vars.cwiseInverse()) {}

double GmmEvaluator::Posteriors(const double *x, double *gamma) const {
  const int num_c = gmm.NumComponents(), dim = gmm.Dim();
  double max_ll = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < num_c; ++c) {
    double ll = log_consts[c];
    if (std::isfinite(ll)) {
      const double *mu = gmm.means.row(c).data();
      const double *iv = inv_vars.row(c).data();
      double quad = 0.0;
      for (int f = 0; f < dim; ++f) {
        const double diff = x[f] - mu[f];
        quad += diff * diff * iv[f];
      }
      ll -= 0.5 * quad;
    }
    gamma[c] = ll;
    if (ll > max_ll) max_ll = ll;
  }
  double sum = 0.0;
  for (int c = 0; c < num_c; ++c) {
    gamma[c] = std::isfinite(gamma[c]) ? std::exp(gamma[c] - max_ll) : 0.0;
    sum += gamma[c];
  }
  for (int c = 0; c < num_c; ++c) gamma[c] /= sum;
  return max_ll + std::log(sum);
}

namespace {

void AccumulateFrame(const GmmEvaluator &eval, const double *x, std::vector<double> *gamma,
                     GmmAccumulator *acc) {
  const int num_c = eval.gmm.NumComponents(), dim = eval.gmm.Dim();
  acc->loglik += eval.Posteriors(x, gamma->data());
  for (int c = 0; c < num_c; ++c) {
    const double g = (*gamma)[c];
    if (g == 0.0) continue;
    acc->occupancy[c] += g;
    double *f1 = acc->first.row(c).data();
    double *f2 = acc->second.row(c).data();
    for (int f = 0; f < dim; ++f) {
      f1[f] += g * x[f];
      f2[f] += g * x[f] * x[f];
    }
  }
}

void BwFrame(const GmmEvaluator &eval, const double *x, std::vector<double> *gamma,
             BwStats *stats) {
  const int num_c = eval.gmm.NumComponents(), dim = eval.gmm.Dim();
  eval.Posteriors(x, gamma->data());
  for (int c = 0; c < num_c; ++c) {
    const double g = (*gamma)[c];
    if (g == 0.0) continue;
    stats->occupancy[c] += g;
    const double *mu = eval.gmm.means.row(c).data();
    double *f1 = stats->first.row(c).data();
    for (int f = 0; f < dim; ++f) f1[f] += g * (x[f] - mu[f]);
  }
}

Eigen::Index NumChunks(Eigen::Index rows) { return (rows + kChunkFrames - 1) / kChunkFrames; }

}  // namespace

GmmAccumulator GmmAccumulateSerial(const DiagGmm &gmm, const Matrix &x) {
  GmmEvaluator eval(gmm);
  GmmAccumulator acc(gmm.NumComponents(), gmm.Dim());
  std::vector<double> gamma(gmm.NumComponents());
  for (Eigen::Index t = 0; t < x.rows(); ++t) AccumulateFrame(eval, x.row(t).data(), &gamma, &acc);
  return acc;
}

GmmAccumulator GmmAccumulateParallel(const DiagGmm &gmm, const Matrix &x) {
  GmmEvaluator eval(gmm);
  const Eigen::Index chunks = NumChunks(x.rows());
  std::vector<GmmAccumulator> partial(chunks, GmmAccumulator(gmm.NumComponents(), gmm.Dim()));
#pragma omp parallel
  {
    std::vector<double> gamma(gmm.NumComponents());
#pragma omp for schedule(static)
    for (Eigen::Index k = 0; k < chunks; ++k) {
      const Eigen::Index end = std::min(x.rows(), (k + 1) * kChunkFrames);
      for (Eigen::Index t = k * kChunkFrames; t < end; ++t)
        AccumulateFrame(eval, x.row(t).data(), &gamma, &partial[k]);
    }
  }
  GmmAccumulator total(gmm.NumComponents(), gmm.Dim());
  for (const auto &p : partial) total.Add(p);
  return total;
}

BwStats BwStatsSerial(const DiagGmm &gmm, const Matrix &x) {
  GmmEvaluator eval(gmm);
  BwStats stats(gmm.NumComponents(), gmm.Dim());
  std::vector<double> gamma(gmm.NumComponents());
  for (Eigen::Index t = 0; t < x.rows(); ++t) BwFrame(eval, x.row(t).data(), &gamma, &stats);
  return stats;
}

BwStats BwStatsParallel(const DiagGmm &gmm, const Matrix &x) {
  GmmEvaluator eval(gmm);
  const Eigen::Index chunks = NumChunks(x.rows());
  std::vector<BwStats> partial(chunks, BwStats(gmm.NumComponents(), gmm.Dim()));
#pragma omp parallel
  {
    std::vector<double> gamma(gmm.NumComponents());
#pragma omp for schedule(static)
    for (Eigen::Index k = 0; k < chunks; ++k) {
      const Eigen::Index end = std::min(x.rows(), (k + 1) * kChunkFrames);
      for (Eigen::Index t = k * kChunkFrames; t < end; ++t)
        BwFrame(eval, x.row(t).data(), &gamma, &partial[k]);
    }
  }
  BwStats total(gmm.NumComponents(), gmm.Dim());
  for (const auto &p : partial) total.Add(p);
  return total;
}

}  // namespace sdvad::kernels
