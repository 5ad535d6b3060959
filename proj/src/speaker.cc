// src/speaker.cc

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


#include "sdvad/speaker.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "sdvad/kernels.h"

namespace sdvad {

Vector DiagGmm::LogConsts() const {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Vector out(NumComponents());
  for (int c = 0; c < NumComponents(); ++c) {
    const double logdet = vars.row(c).array().log().sum();
    out[c] = (weights[c] > 0 ? std::log(weights[c]) : -std::numeric_limits<double>::infinity()) -
             0.5 * (Dim() * log_2pi + logdet);
  }
  return out;
}

double DiagGmm::LogLikelihood(const Matrix &x) const {
  return kernels::GmmAccumulateParallel(*this, x).loglik;
}

namespace {

Matrix StackFrames(const std::vector<FeatureMatrix> &features) {
  Eigen::Index rows = 0, dim = -1;
  for (const auto &f : features) {
    if (f.NumFrames() == 0) continue;
    if (dim >= 0 && f.Dim() != dim) throw ContractError("feature dimensions differ across inputs");
    dim = f.Dim();
    rows += f.NumFrames();
  }
  Matrix all(rows, std::max<Eigen::Index>(dim, 0));
  Eigen::Index at = 0;
  for (const auto &f : features) {
    if (f.NumFrames() == 0) continue;
    all.middleRows(at, f.NumFrames()) = f.values;
    at += f.NumFrames();
  }
  return all;
}

// Lloyd iterations in globally standardised space.
Matrix KMeans(const Matrix &x, int k, int iters, const Vector &inv_std, std::mt19937_64 *rng,
              std::vector<Eigen::Index> *counts) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> idx(n);
  for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
  for (int c = 0; c < k; ++c) {
    std::uniform_int_distribution<Eigen::Index> pick(c, n - 1);
    std::swap(idx[c], idx[pick(*rng)]);
  }
  Matrix centers(k, x.cols());
  for (int c = 0; c < k; ++c) centers.row(c) = x.row(idx[c]);

  std::vector<int> assign(n, 0);
  counts->assign(k, 0);
  for (int it = 0; it <= iters; ++it) {
    counts->assign(k, 0);
    for (Eigen::Index t = 0; t < n; ++t) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = ((x.row(t) - centers.row(c)).transpose().cwiseProduct(inv_std)).squaredNorm();
        if (d < best_d) best_d = d, best = c;
      }
      assign[t] = best;
      ++(*counts)[best];
    }
    if (it == iters) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    for (Eigen::Index t = 0; t < n; ++t) sums.row(assign[t]) += x.row(t);
    for (int c = 0; c < k; ++c)
      if ((*counts)[c] > 0) centers.row(c) = sums.row(c) / static_cast<double>((*counts)[c]);
  }
  return centers;
}

}  // namespace

DiagGmm TrainUbm(const std::vector<FeatureMatrix> &features, const UbmOptions &opts,
                 std::vector<double> *loglik_trace) {
  const int num_c = opts.num_components;
  if (num_c < 1) throw ConfigError("UBM needs at least one component");
  const Matrix x = StackFrames(features);
  if (x.rows() < 10 * static_cast<Eigen::Index>(num_c))
    throw DataError("UBM training needs >= 10 frames per component: have " +
                    std::to_string(x.rows()) + " frames for " + std::to_string(num_c) +
                    " components");
  if (!x.allFinite()) throw DataError("UBM training features contain non-finite values");

  const Eigen::Index n = x.rows(), dim = x.cols();
  const Eigen::RowVectorXd gmean = x.colwise().mean();
  const Eigen::RowVectorXd gvar = (x.rowwise() - gmean).array().square().colwise().mean();
  Eigen::RowVectorXd floor = opts.var_floor_ratio * gvar;
  for (Eigen::Index f = 0; f < dim; ++f)
    if (!(floor[f] > 0)) floor[f] = 1e-10;
  Vector inv_std(dim);
  for (Eigen::Index f = 0; f < dim; ++f) inv_std[f] = gvar[f] > 0 ? 1.0 / std::sqrt(gvar[f]) : 1.0;

  std::mt19937_64 rng(opts.seed);
  std::vector<Eigen::Index> counts;
  DiagGmm gmm;
  gmm.means = KMeans(x, num_c, opts.kmeans_iters, inv_std, &rng, &counts);
  gmm.vars = Matrix::Zero(num_c, dim);
  gmm.weights = Vector::Zero(num_c);
  {
    Matrix sq = Matrix::Zero(num_c, dim);
    // Reassign to nearest centre for the initial variances.
    for (Eigen::Index t = 0; t < n; ++t) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < num_c; ++c) {
        const double d =
            ((x.row(t) - gmm.means.row(c)).transpose().cwiseProduct(inv_std)).squaredNorm();
        if (d < best_d) best_d = d, best = c;
      }
      sq.row(best) += (x.row(t) - gmm.means.row(best)).array().square().matrix();
    }
    double total = 0.0;
    for (int c = 0; c < num_c; ++c) {
      const double cnt = std::max<double>(static_cast<double>(counts[c]), 1.0);
      gmm.weights[c] = cnt;
      total += cnt;
      gmm.vars.row(c) = counts[c] >= 2 ? Eigen::RowVectorXd(sq.row(c) / cnt) : gvar;
      gmm.vars.row(c) = gmm.vars.row(c).cwiseMax(floor);
    }
    gmm.weights /= total;
  }

  if (loglik_trace) loglik_trace->clear();
  for (int it = 0; it < opts.num_iters; ++it) {
    const kernels::GmmAccumulator acc = kernels::GmmAccumulateParallel(gmm, x);
    if (!std::isfinite(acc.loglik)) throw NumericalError("UBM EM produced a non-finite likelihood");
    if (loglik_trace) loglik_trace->push_back(acc.loglik);
    const double total = acc.occupancy.sum();
    for (int c = 0; c < num_c; ++c) {
      const double occ = acc.occupancy[c];
      gmm.weights[c] = occ / total;
      if (occ < 1e-10) continue;
      const Eigen::RowVectorXd mean = acc.first.row(c) / occ;
      Eigen::RowVectorXd var = acc.second.row(c) / occ - mean.cwiseProduct(mean);
      gmm.means.row(c) = mean;
      gmm.vars.row(c) = var.cwiseMax(floor);
    }
  }
  if (loglik_trace) loglik_trace->push_back(gmm.LogLikelihood(x));
  return gmm;
}

void BwStats::Add(const BwStats &other) {
  if (occupancy.size() == 0) {
    *this = other;
    return;
  }
  if (other.occupancy.size() != occupancy.size() || other.first.cols() != first.cols())
    throw ContractError("BwStats::Add: shape mismatch");
  occupancy += other.occupancy;
  first += other.first;
}

void BwStats::Scale(double factor) {
  occupancy *= factor;
  first *= factor;
}

BwStats ComputeBwStats(const Matrix &feats, const DiagGmm &ubm) {
  if (feats.rows() > 0 && feats.cols() != ubm.Dim())
    throw ContractError("bw_stats: feature dim " + std::to_string(feats.cols()) +
                        " != UBM dim " + std::to_string(ubm.Dim()));
  if (feats.rows() == 0) return BwStats(ubm.NumComponents(), ubm.Dim());
  return kernels::BwStatsParallel(ubm, feats);
}

IvectorExtractor::IvectorExtractor(const DiagGmm &ubm, const TvMatrix &tv)
    : dim_(tv.IvectorDim()) {
  if (tv.NumComponents() != ubm.NumComponents())
    throw ContractError("TV matrix has " + std::to_string(tv.NumComponents()) +
                        " blocks but the UBM has " + std::to_string(ubm.NumComponents()) +
                        " components");
  t_sinv_.resize(ubm.NumComponents());
  t_sinv_t_.resize(ubm.NumComponents());
  for (int c = 0; c < ubm.NumComponents(); ++c) {
    const Matrix &tc = tv.blocks[c];
    if (tc.rows() != ubm.Dim()) throw ContractError("TV block rows != UBM feature dim");
    t_sinv_[c] = tc.transpose() * ubm.vars.row(c).cwiseInverse().asDiagonal();
    t_sinv_t_[c] = t_sinv_[c] * tc;
  }
}

IVector IvectorExtractor::Extract(const BwStats &stats, Matrix *precision) const {
  const auto num_c = static_cast<int>(t_sinv_.size());
  if (stats.occupancy.size() != num_c)
    throw ContractError("BwStats component count does not match the extractor");
  if (!stats.occupancy.allFinite() || !stats.first.allFinite())
    throw DataError("i-vector extraction: non-finite statistics");
  Matrix l = Matrix::Identity(dim_, dim_);
  Vector b = Vector::Zero(dim_);
  for (int c = 0; c < num_c; ++c) {
    const double occ = stats.occupancy[c];
    if (occ != 0.0) l += occ * t_sinv_t_[c];
    b += t_sinv_[c] * stats.first.row(c).transpose();
  }
  IVector out;
  out.values = l.llt().solve(b);
  if (precision) *precision = l;
  return out;
}

IVector ExtractIvector(const BwStats &stats, const TvMatrix &tv, const DiagGmm &ubm) {
  return IvectorExtractor(ubm, tv).Extract(stats);
}

double TvObjective(const std::vector<BwStats> &stats, const DiagGmm &ubm, const TvMatrix &tv) {
  const IvectorExtractor ex(ubm, tv);
  double obj = 0.0;
  for (const auto &s : stats) {
    Matrix l;
    const IVector w = ex.Extract(s, &l);
    Vector b = l * w.values;
    Eigen::LLT<Matrix> llt(l);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    obj += 0.5 * b.dot(w.values) - 0.5 * logdet;
  }
  return obj;
}

TvMatrix TrainTv(const std::vector<BwStats> &stats, const DiagGmm &ubm, const TvOptions &opts,
                 std::vector<double> *objective_trace) {
  const int d = opts.ivector_dim, num_c = ubm.NumComponents(), dim = ubm.Dim();
  if (d < 1) throw ConfigError("i-vector dimension must be >= 1");
  if (static_cast<int>(stats.size()) < d)
    throw DataError("TV training needs at least d=" + std::to_string(d) + " utterances, have " +
                    std::to_string(stats.size()));
  for (const auto &s : stats)
    if (s.occupancy.size() != num_c || s.first.cols() != dim)
      throw ContractError("BwStats shape does not match the UBM");

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  TvMatrix tv;
  tv.blocks.resize(num_c);
  for (int c = 0; c < num_c; ++c) {
    tv.blocks[c].resize(dim, d);
    for (int f = 0; f < dim; ++f) {
      const double sd = std::sqrt(ubm.vars(c, f));
      for (int j = 0; j < d; ++j) tv.blocks[c](f, j) = sd * normal(rng);
    }
  }

  if (objective_trace) objective_trace->clear();
  for (int it = 0; it <= opts.num_iters; ++it) {
    const IvectorExtractor ex(ubm, tv);
    std::vector<Matrix> a_acc(num_c, Matrix::Zero(d, d));
    std::vector<Matrix> c_acc(num_c, Matrix::Zero(dim, d));
    Matrix r_acc = Matrix::Zero(d, d);
    double obj = 0.0;
    for (const auto &s : stats) {
      Matrix l;
      const Vector w = ex.Extract(s, &l).values;
      Eigen::LLT<Matrix> llt(l);
      if (llt.info() != Eigen::Success)
        throw NumericalError("TV E-step: posterior precision is not positive definite");
      const Matrix cov = llt.solve(Matrix::Identity(d, d));
      obj += 0.5 * (l * w).dot(w) - llt.matrixLLT().diagonal().array().log().sum();
      if (it == opts.num_iters) continue;
      const Matrix second = cov + w * w.transpose();
      r_acc += second;
      for (int c = 0; c < num_c; ++c) {
        const double occ = s.occupancy[c];
        if (occ != 0.0) a_acc[c] += occ * second;
        c_acc[c] += s.first.row(c).transpose() * w.transpose();
      }
    }
    if (!std::isfinite(obj)) throw NumericalError("TV EM produced a non-finite objective");
    if (objective_trace) objective_trace->push_back(obj);
    if (it == opts.num_iters) break;

    for (int c = 0; c < num_c; ++c) {
      Eigen::LLT<Matrix> llt(a_acc[c]);
      if (llt.info() != Eigen::Success || !(a_acc[c].diagonal().minCoeff() > 0)) {
        int contributing = 0;
        double occ = 0.0;
        for (const auto &s : stats) {
          occ += s.occupancy[c];
          contributing += s.occupancy[c] > 0;
        }
        throw NumericalError("TV M-step: singular accumulator for component " +
                             std::to_string(c) + " (total occupancy " + std::to_string(occ) +
                             " from " + std::to_string(contributing) + " of " +
                             std::to_string(stats.size()) + " utterances)");
      }
      tv.blocks[c] = llt.solve(c_acc[c].transpose()).transpose();
    }
    // Minimum-divergence step: re-express w so that its average posterior
    // second moment is the identity, T <- T chol(R).  The likelihood is
    // unchanged by the reparametrisation of a maximised prior, and EM no
    // longer creeps along the scale direction.
    Eigen::LLT<Matrix> r_llt(r_acc / static_cast<double>(stats.size()));
    if (r_llt.info() != Eigen::Success)
      throw NumericalError("TV minimum-divergence step: posterior second moment is singular");
    const Matrix chol = r_llt.matrixL();
    for (int c = 0; c < num_c; ++c) tv.blocks[c] = tv.blocks[c] * chol;
  }
  return tv;
}

IVector LengthNormalize(const IVector &ivec) {
  const double norm = ivec.values.norm();
  if (!(norm > 0) || !std::isfinite(norm))
    throw NumericalError("cannot length-normalise a zero or non-finite vector");
  return IVector{ivec.values / norm, true};
}

double CosineScore(const IVector &a, const IVector &b) {
  if (a.values.size() != b.values.size()) throw ContractError("cosine: dimension mismatch");
  const double c = LengthNormalize(a).values.dot(LengthNormalize(b).values);
  return std::clamp(c, -1.0, 1.0);
}

PldaModel TrainPlda(const std::vector<IVector> &ivecs, const std::vector<std::string> &speakers) {
  if (ivecs.size() != speakers.size()) throw ContractError("PLDA: one label per i-vector");
  if (ivecs.empty()) throw DataError("PLDA: no training vectors");
  const Eigen::Index d = ivecs[0].values.size();
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < ivecs.size(); ++i) {
    if (ivecs[i].values.size() != d) throw ContractError("PLDA: inconsistent i-vector dimension");
    by_speaker[speakers[i]].push_back(i);
  }
  if (by_speaker.size() < 2) throw DataError("PLDA needs at least 2 speakers");

  PldaModel model;
  model.mean = Vector::Zero(d);
  for (const auto &v : ivecs) model.mean += v.values;
  model.mean /= static_cast<double>(ivecs.size());

  model.between = Matrix::Zero(d, d);
  model.within = Matrix::Zero(d, d);
  double within_count = 0.0;
  for (const auto &[spk, idx] : by_speaker) {
    Vector m = Vector::Zero(d);
    for (auto i : idx) m += ivecs[i].values;
    m /= static_cast<double>(idx.size());
    const Vector dm = m - model.mean;
    model.between += dm * dm.transpose();
    if (idx.size() < 2) continue;
    for (auto i : idx) {
      const Vector e = ivecs[i].values - m;
      model.within += e * e.transpose();
    }
    within_count += static_cast<double>(idx.size());
  }
  if (within_count == 0)
    throw DataError("PLDA: every speaker has a single utterance; within-class covariance undefined");
  model.between /= static_cast<double>(by_speaker.size());
  model.within /= within_count;
  model.between = 0.5 * (model.between + model.between.transpose()) + 1e-6 * Matrix::Identity(d, d);
  model.within = 0.5 * (model.within + model.within.transpose()) + 1e-6 * Matrix::Identity(d, d);
  return model;
}

namespace {

double LogDetSpd(const Matrix &m, const char *what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string("PLDA: ") + what + " is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

PldaScorer::PldaScorer(const PldaModel &model) : mean_(model.mean) {
  const Eigen::Index d = model.mean.size();
  if (model.between.rows() != d || model.within.rows() != d)
    throw ContractError("PLDA model covariance shapes disagree with the mean");
  const Matrix total = model.between + model.within;
  const Matrix identity = Matrix::Identity(d, d);
  const Matrix total_inv = total.llt().solve(identity);
  const Matrix reduced = total - model.between * total_inv * model.between;
  const Matrix lambda = reduced.llt().solve(identity);
  q_ = total_inv - lambda;
  q_ = 0.5 * (q_ + q_.transpose()).eval();
  p_ = total_inv * model.between * lambda;
  p_ = 0.5 * (p_ + p_.transpose()).eval();
  offset_ = 0.5 * (LogDetSpd(total, "between + within") - LogDetSpd(reduced, "conditional covariance"));
}

double PldaScorer::Score(const Vector &enroll, const Vector &test) const {
  if (enroll.size() != mean_.size() || test.size() != mean_.size())
    throw ContractError("PLDA score: dimension mismatch");
  const Vector a = enroll - mean_, b = test - mean_;
  return 0.5 * a.dot(q_ * a) + 0.5 * b.dot(q_ * b) + a.dot(p_ * b) + offset_;
}

double PldaScore(const PldaModel &model, const IVector &enroll, const IVector &test) {
  return PldaScorer(model).Score(enroll.values, test.values);
}

double EerThreshold(std::vector<double> target, std::vector<double> nontarget, double *eer) {
  if (target.empty() || nontarget.empty())
    throw DataError("EER calibration needs both target and non-target trials");
  std::sort(target.begin(), target.end());
  std::sort(nontarget.begin(), nontarget.end());
  std::vector<double> cands(target);
  cands.insert(cands.end(), nontarget.begin(), nontarget.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  const auto nt = static_cast<double>(target.size()), nn = static_cast<double>(nontarget.size());
  double best_gap = std::numeric_limits<double>::infinity(), best_rate = 1.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    // Accept iff score >= threshold.
    const double miss =
        static_cast<double>(std::lower_bound(target.begin(), target.end(), cands[i]) - target.begin()) / nt;
    const double fa = static_cast<double>(nontarget.end() -
                                          std::lower_bound(nontarget.begin(), nontarget.end(), cands[i])) / nn;
    const double gap = std::abs(miss - fa);
    if (gap < best_gap) best_gap = gap, best = i, best_rate = 0.5 * (miss + fa);
  }
  if (eer) *eer = best_rate;
  return best == 0 ? cands[0] : 0.5 * (cands[best - 1] + cands[best]);
}

}  // namespace sdvad
