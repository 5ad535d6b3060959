// src/nnet.cc

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


#include "sdvad/nnet.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <omp.h>

namespace sdvad {

FeatureMatrix AttachSpeaker(const FeatureMatrix &feats, const Vector &embedding) {
  FeatureMatrix out;
  out.frame_shift_ms = feats.frame_shift_ms;
  out.frame_length_ms = feats.frame_length_ms;
  const Eigen::Index rows = feats.NumFrames(), dim = feats.Dim(), d = embedding.size();
  out.values.resize(rows, dim + d);
  out.values.leftCols(dim) = feats.values;
  for (Eigen::Index t = 0; t < rows; ++t) out.values.row(t).tail(d) = embedding.transpose();
  return out;
}

Vector InputNorm::Apply(const double *x) const {
  Vector out(shift.size());
  for (Eigen::Index i = 0; i < shift.size(); ++i) out[i] = (x[i] - shift[i]) * scale[i];
  return out;
}

InputNorm IdentityNorm(int dim) { return InputNorm{Vector::Zero(dim), Vector::Ones(dim)}; }

InputNorm FitInputNorm(const std::vector<const Matrix *> &inputs) {
  Eigen::Index dim = -1;
  double count = 0.0;
  for (const Matrix *m : inputs) {
    if (m->rows() == 0) continue;
    if (dim >= 0 && m->cols() != dim) throw ContractError("FitInputNorm: inconsistent widths");
    dim = m->cols();
    count += static_cast<double>(m->rows());
  }
  if (dim < 0) throw DataError("FitInputNorm: no frames");
  Vector mean = Vector::Zero(dim);
  for (const Matrix *m : inputs)
    if (m->rows()) mean += m->colwise().sum().transpose();
  mean /= count;
  Vector var = Vector::Zero(dim);
  for (const Matrix *m : inputs)
    if (m->rows()) var += (m->rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  var /= count;
  InputNorm norm{mean, Vector::Ones(dim)};
  for (Eigen::Index i = 0; i < dim; ++i)
    if (var[i] > 1e-12) norm.scale[i] = 1.0 / std::sqrt(var[i]);
  return norm;
}

int InputDim(const SequenceModel &model) {
  return std::visit([](const auto &m) { return m.InputDim(); }, model);
}

namespace {

void InitUniform(Matrix *w, int fan_in, std::mt19937_64 *rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = dist(*rng);
}

void InitUniform(Vector *b, int fan_in, std::mt19937_64 *rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = dist(*rng);
}

std::pair<double, double> Softmax2(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}


// tanh(x) = 1 - 2 / (exp(2x) + 1): vectorises through exp, and saturates
// exactly to +-1 at the limits.
template <typename Derived>
auto Tanh(const Eigen::ArrayBase<Derived> &x) {
  return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

// In place over one step's 4H pre-activations: logistic on the input,
// forget and output blocks, tanh on the candidate block.
void ActivateGates(Vector *a, int hid) {
  auto s = a->head(3 * hid).array();
  s = (1.0 + (-s).exp()).inverse();
  auto g = a->tail(hid).array();
  g = Tanh(g).eval();
}

Matrix Normalize(const InputNorm &norm, const Matrix &x) {
  if (x.cols() != norm.Dim())
    throw ContractError("model expects input dim " + std::to_string(norm.Dim()) + ", got " +
                        std::to_string(x.cols()));
  return ((x.rowwise() - norm.shift.transpose()).array().rowwise() * norm.scale.transpose().array())
      .matrix();
}

void CheckLabels(const Sequence &seq) {
  if (static_cast<std::size_t>(seq.inputs.rows()) != seq.labels.size())
    throw ContractError("sequence has " + std::to_string(seq.inputs.rows()) + " frames but " +
                        std::to_string(seq.labels.size()) + " labels");
  for (auto l : seq.labels)
    if (l > 1) throw ContractError("labels must be 0 or 1");
}

// Softmax posteriors of T x 2 logits; returns the summed loss and writes
// d(sum loss)/d(logits) into `dlogits`.
double SoftmaxLoss(const Matrix &logits, const Labels &labels, Matrix *dlogits) {
  dlogits->resize(logits.rows(), 2);
  double loss = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    auto [p0, p1] = Softmax2(logits(t, 0), logits(t, 1));
    const double p_true = labels[t] ? p1 : p0;
    loss -= std::log(std::max(p_true, 1e-12));
    (*dlogits)(t, 0) = p0 - (labels[t] == 0 ? 1.0 : 0.0);
    (*dlogits)(t, 1) = p1 - (labels[t] == 1 ? 1.0 : 0.0);
  }
  return loss;
}

MlpModel ZeroLike(const MlpModel &m) {
  MlpModel z;
  z.norm = m.norm;
  for (const auto &l : m.layers)
    z.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  return z;
}

LstmModel ZeroLike(const LstmModel &m) {
  LstmModel z;
  z.norm = m.norm;
  for (const auto &l : m.layers)
    z.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Matrix::Zero(l.u.rows(), l.u.cols()),
                        Vector::Zero(l.b.size())});
  z.out = {Matrix::Zero(m.out.w.rows(), m.out.w.cols()), Vector::Zero(m.out.b.size())};
  return z;
}

void AddInto(MlpModel *acc, const MlpModel &g) {
  for (std::size_t i = 0; i < acc->layers.size(); ++i) {
    acc->layers[i].w += g.layers[i].w;
    acc->layers[i].b += g.layers[i].b;
  }
}

void AddInto(LstmModel *acc, const LstmModel &g) {
  for (std::size_t i = 0; i < acc->layers.size(); ++i) {
    acc->layers[i].w += g.layers[i].w;
    acc->layers[i].u += g.layers[i].u;
    acc->layers[i].b += g.layers[i].b;
  }
  acc->out.w += g.out.w;
  acc->out.b += g.out.b;
}

// Summed (not averaged) loss of one sequence, gradient accumulated into grad.
double SequenceGradient(const MlpModel &model, const Sequence &seq, MlpModel *grad) {
  CheckLabels(seq);
  const std::size_t num_layers = model.layers.size();
  std::vector<Matrix> acts(num_layers);
  acts[0] = Normalize(model.norm, seq.inputs);
  Matrix logits;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const auto &layer = model.layers[l];
    Matrix z = acts[l] * layer.w.transpose();
    z.rowwise() += layer.b.transpose();
    if (l + 1 < num_layers)
      acts[l + 1] = z.array().tanh().matrix();
    else
      logits = std::move(z);
  }
  Matrix dz;
  const double loss = SoftmaxLoss(logits, seq.labels, &dz);
  for (std::size_t l = num_layers; l-- > 0;) {
    const auto &layer = model.layers[l];
    grad->layers[l].w += dz.transpose() * acts[l];
    grad->layers[l].b += dz.colwise().sum().transpose();
    if (l == 0) break;
    Matrix da = dz * layer.w;
    dz = (da.array() * (1.0 - acts[l].array().square())).matrix();
  }
  return loss;
}

struct LstmCache {
  Matrix input;             // T x in
  Matrix i, f, o, g, c, tc, h;  // T x H each
};

double SequenceGradient(const LstmModel &model, const Sequence &seq, LstmModel *grad) {
  CheckLabels(seq);
  const Eigen::Index steps = seq.inputs.rows();
  const std::size_t num_layers = model.layers.size();
  std::vector<LstmCache> caches(num_layers);
  Matrix x = Normalize(model.norm, seq.inputs);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const LstmLayer &layer = model.layers[l];
    const int hid = layer.Hidden();
    LstmCache &cc = caches[l];
    cc.input = std::move(x);
    Matrix pre = cc.input * layer.w.transpose();
    pre.rowwise() += layer.b.transpose();
    for (Matrix *m : {&cc.i, &cc.f, &cc.o, &cc.g, &cc.c, &cc.tc, &cc.h}) m->resize(steps, hid);
    Vector h_prev = Vector::Zero(hid), c_prev = Vector::Zero(hid), a(4 * hid), tcell(hid);
    for (Eigen::Index t = 0; t < steps; ++t) {
      a.noalias() = layer.u * h_prev;
      a += pre.row(t).transpose();
      ActivateGates(&a, hid);
      const auto ig = a.segment(0, hid).array(), fg = a.segment(hid, hid).array();
      const auto og = a.segment(2 * hid, hid).array(), cand = a.segment(3 * hid, hid).array();
      c_prev.array() = fg * c_prev.array() + ig * cand;
      tcell.array() = Tanh(c_prev.array());
      h_prev.array() = og * tcell.array();
      cc.i.row(t) = ig.transpose();
      cc.f.row(t) = fg.transpose();
      cc.o.row(t) = og.transpose();
      cc.g.row(t) = cand.transpose();
      cc.c.row(t) = c_prev.transpose();
      cc.tc.row(t) = tcell.transpose();
      cc.h.row(t) = h_prev.transpose();
    }
    x = cc.h;
  }
  Matrix logits = x * model.out.w.transpose();
  logits.rowwise() += model.out.b.transpose();
  Matrix dlogits;
  const double loss = SoftmaxLoss(logits, seq.labels, &dlogits);

  grad->out.w += dlogits.transpose() * x;
  grad->out.b += dlogits.colwise().sum().transpose();
  Matrix dh_above = dlogits * model.out.w;  // T x H of the top layer
  for (std::size_t l = num_layers; l-- > 0;) {
    const LstmLayer &layer = model.layers[l];
    const LstmCache &cc = caches[l];
    const int hid = layer.Hidden();
    Matrix dpre(steps, 4 * hid);
    Vector dh_rec = Vector::Zero(hid), dc_next = Vector::Zero(hid);
    Vector dh(hid), dc(hid), c_prev(hid);
    for (Eigen::Index t = steps; t-- > 0;) {
      const auto ig = cc.i.row(t).transpose().array(), fg = cc.f.row(t).transpose().array();
      const auto og = cc.o.row(t).transpose().array(), cand = cc.g.row(t).transpose().array();
      const auto tcell = cc.tc.row(t).transpose().array();
      if (t > 0)
        c_prev = cc.c.row(t - 1).transpose();
      else
        c_prev.setZero();
      dh = dh_above.row(t).transpose() + dh_rec;
      dc.array() = dh.array() * og * (1.0 - tcell.square()) + dc_next.array();
      auto row = dpre.row(t);
      row.segment(0, hid) = (dc.array() * cand * ig * (1.0 - ig)).transpose();
      row.segment(hid, hid) = (dc.array() * c_prev.array() * fg * (1.0 - fg)).transpose();
      row.segment(2 * hid, hid) = (dh.array() * tcell * og * (1.0 - og)).transpose();
      row.segment(3 * hid, hid) = (dc.array() * ig * (1.0 - cand.square())).transpose();
      dc_next.array() = dc.array() * fg;
      dh_rec.noalias() = layer.u.transpose() * dpre.row(t).transpose();
    }
    if (steps > 1)
      grad->layers[l].u.noalias() += dpre.bottomRows(steps - 1).transpose() * cc.h.topRows(steps - 1);
    grad->layers[l].w += dpre.transpose() * cc.input;
    grad->layers[l].b += dpre.colwise().sum().transpose();
    if (l > 0) dh_above = dpre * layer.w;
  }
  return loss;
}

using BatchRefs = std::vector<const Sequence *>;

BatchRefs Refs(std::span<const Sequence> batch) {
  BatchRefs refs;
  for (const auto &s : batch) refs.push_back(&s);
  return refs;
}

template <typename Model>
double BatchGradient(const Model &model, const BatchRefs &batch, Model *grad) {
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<Model> partial(batch.size(), ZeroLike(model));
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<std::string> errors(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      losses[k] = SequenceGradient(model, *batch[k], &partial[k]);
    } catch (const std::exception &e) {
      errors[k] = e.what();
    }
  }
  for (const auto &e : errors)
    if (!e.empty()) throw ContractError(e);
  *grad = ZeroLike(model);
  double loss = 0.0, frames = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    AddInto(grad, partial[k]);
    loss += losses[k];
    frames += static_cast<double>(batch[k]->inputs.rows());
  }
  if (frames == 0) return 0.0;
  for (auto s : Parameters(*grad))
    for (double &v : s) v /= frames;
  return loss / frames;
}

template <typename Model>
double Step(Model *model, const BatchRefs &batch, const TrainConfig &config) {
  Model grad;
  const double loss = BatchGradient(*model, batch, &grad);
  if (!std::isfinite(loss)) throw NumericalError("training diverged: non-finite loss");
  auto gspans = Parameters(grad);
  double sq = 0.0;
  for (auto s : gspans)
    for (double v : s) sq += v * v;
  const double norm = std::sqrt(sq);
  const double scale = config.clip_norm > 0 && norm > config.clip_norm ? config.clip_norm / norm : 1.0;
  auto pspans = Parameters(*model);
  for (std::size_t i = 0; i < pspans.size(); ++i)
    for (std::size_t j = 0; j < pspans[i].size(); ++j)
      pspans[i][j] -= config.learning_rate * (scale * gspans[i][j]);
  return loss;
}

}  // namespace

MlpModel InitMlp(int input_dim, const std::vector<int> &hidden, std::uint64_t seed) {
  if (input_dim < 1) throw ConfigError("MLP input dim must be >= 1");
  std::mt19937_64 rng(seed);
  MlpModel m;
  m.norm = IdentityNorm(input_dim);
  int in = input_dim;
  std::vector<int> widths = hidden;
  widths.push_back(2);
  for (int out : widths) {
    if (out < 1) throw ConfigError("layer widths must be >= 1");
    DenseLayer layer{Matrix(out, in), Vector(out)};
    InitUniform(&layer.w, in, &rng);
    InitUniform(&layer.b, in, &rng);
    m.layers.push_back(std::move(layer));
    in = out;
  }
  return m;
}

LstmModel InitLstm(int input_dim, int hidden, int num_layers, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || num_layers < 1)
    throw ConfigError("LSTM needs positive input dim, width and depth");
  std::mt19937_64 rng(seed);
  LstmModel m;
  m.norm = IdentityNorm(input_dim);
  int in = input_dim;
  for (int l = 0; l < num_layers; ++l) {
    LstmLayer layer{Matrix(4 * hidden, in), Matrix(4 * hidden, hidden), Vector(4 * hidden)};
    InitUniform(&layer.w, in, &rng);
    InitUniform(&layer.u, hidden, &rng);
    InitUniform(&layer.b, in, &rng);
    layer.b.segment(hidden, hidden).setOnes();
    m.layers.push_back(std::move(layer));
    in = hidden;
  }
  m.out = {Matrix(2, hidden), Vector(2)};
  InitUniform(&m.out.w, hidden, &rng);
  InitUniform(&m.out.b, hidden, &rng);
  return m;
}

std::pair<double, double> MlpForwardRow(const MlpModel &model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.InputDim())
    throw ContractError("MLP expects input dim " + std::to_string(model.InputDim()) + ", got " +
                        std::to_string(x.size()));
  Vector h = model.norm.Apply(x.data());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Vector z = model.layers[l].w * h + model.layers[l].b;
    if (l + 1 < model.layers.size())
      h = z.array().tanh().matrix();
    else
      return Softmax2(z[0], z[1]);
  }
  throw ContractError("MLP has no layers");
}

Matrix MlpForward(const MlpModel &model, const Matrix &x) {
  Matrix out(x.rows(), 2);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    auto [p0, p1] = MlpForwardRow(model, {x.row(t).data(), static_cast<std::size_t>(x.cols())});
    out(t, 0) = p0;
    out(t, 1) = p1;
  }
  return out;
}

LstmState InitialState(const LstmModel &model) {
  LstmState s;
  for (const auto &l : model.layers) {
    s.h.push_back(Vector::Zero(l.Hidden()));
    s.c.push_back(Vector::Zero(l.Hidden()));
  }
  return s;
}

std::pair<double, double> LstmStep(const LstmModel &model, LstmState *state,
                                   std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.InputDim())
    throw ContractError("LSTM expects input dim " + std::to_string(model.InputDim()) + ", got " +
                        std::to_string(x.size()));
  Vector in = model.norm.Apply(x.data());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LstmLayer &layer = model.layers[l];
    const int hid = layer.Hidden();
    Vector &h = state->h[l];
    Vector &c = state->c[l];
    Vector a = layer.b;
    a.noalias() += layer.w * in;
    a.noalias() += layer.u * h;
    ActivateGates(&a, hid);
    c.array() = a.segment(hid, hid).array() * c.array() + a.segment(0, hid).array() * a.segment(3 * hid, hid).array();
    h.array() = a.segment(2 * hid, hid).array() * Tanh(c.array());
    in = h;
  }
  const Vector z = model.out.w * in + model.out.b;
  return Softmax2(z[0], z[1]);
}

Matrix LstmForward(const LstmModel &model, const Matrix &x) {
  Matrix out(x.rows(), 2);
  LstmState state = InitialState(model);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    auto [p0, p1] = LstmStep(model, &state, {x.row(t).data(), static_cast<std::size_t>(x.cols())});
    out(t, 0) = p0;
    out(t, 1) = p1;
  }
  return out;
}

Matrix Forward(const SequenceModel &model, const Matrix &x) {
  if (const auto *mlp = std::get_if<MlpModel>(&model)) return MlpForward(*mlp, x);
  return LstmForward(std::get<LstmModel>(model), x);
}

double CrossEntropy(const Matrix &posteriors, const Labels &labels) {
  if (static_cast<std::size_t>(posteriors.rows()) != labels.size() || posteriors.cols() != 2)
    throw ContractError("cross_entropy: " + std::to_string(posteriors.rows()) +
                        " posteriors vs " + std::to_string(labels.size()) + " labels");
  if (labels.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t)
    loss -= std::log(std::max(posteriors(static_cast<Eigen::Index>(t), labels[t] ? 1 : 0), 1e-12));
  return loss / static_cast<double>(labels.size());
}

double LossAndGradient(const MlpModel &model, std::span<const Sequence> batch, MlpModel *grad) {
  return BatchGradient(model, Refs(batch), grad);
}

double LossAndGradient(const LstmModel &model, std::span<const Sequence> batch, LstmModel *grad) {
  return BatchGradient(model, Refs(batch), grad);
}

std::vector<std::span<double>> Parameters(MlpModel &model) {
  std::vector<std::span<double>> out;
  for (auto &l : model.layers) {
    out.emplace_back(l.w.data(), static_cast<std::size_t>(l.w.size()));
    out.emplace_back(l.b.data(), static_cast<std::size_t>(l.b.size()));
  }
  return out;
}

std::vector<std::span<double>> Parameters(LstmModel &model) {
  std::vector<std::span<double>> out;
  for (auto &l : model.layers) {
    out.emplace_back(l.w.data(), static_cast<std::size_t>(l.w.size()));
    out.emplace_back(l.u.data(), static_cast<std::size_t>(l.u.size()));
    out.emplace_back(l.b.data(), static_cast<std::size_t>(l.b.size()));
  }
  out.emplace_back(model.out.w.data(), static_cast<std::size_t>(model.out.w.size()));
  out.emplace_back(model.out.b.data(), static_cast<std::size_t>(model.out.b.size()));
  return out;
}

std::size_t NumParameters(const SequenceModel &model) {
  SequenceModel copy = model;
  return std::visit(
      [](auto &m) {
        std::size_t n = 0;
        for (auto s : Parameters(m)) n += s.size();
        return n;
      },
      copy);
}

double TrainStep(MlpModel *model, std::span<const Sequence> batch, const TrainConfig &config) {
  return Step(model, Refs(batch), config);
}

double TrainStep(LstmModel *model, std::span<const Sequence> batch, const TrainConfig &config) {
  return Step(model, Refs(batch), config);
}

void Train(SequenceModel *model, const std::function<const std::vector<Sequence> &(int)> &data_for,
           const TrainConfig &config, const std::function<void(const EpochReport &)> &on_epoch) {
  if (!(config.learning_rate >= 0)) throw ConfigError("learning rate must be non-negative");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<Sequence> &data = data_for(epoch);
    order.resize(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, frames = 0.0;
    BatchRefs batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      double batch_frames = 0.0;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        batch.push_back(&data[order[k]]);
        batch_frames += static_cast<double>(data[order[k]].inputs.rows());
      }
      const double loss =
          std::visit([&](auto &m) { return Step(&m, batch, config); }, *model);
      loss_sum += loss * batch_frames;
      frames += batch_frames;
    }
    if (on_epoch) on_epoch({epoch + 1, frames > 0 ? loss_sum / frames : 0.0});
  }
}

void Train(SequenceModel *model, const std::vector<Sequence> &data, const TrainConfig &config,
           const std::function<void(const EpochReport &)> &on_epoch) {
  Train(model, [&data](int) -> const std::vector<Sequence> & { return data; }, config, on_epoch);
}

namespace {

// Loss of a batch evaluated element by element in type T.  Used by GradCheck
// with long double so that finite differences resolve partials far below
// the roundoff floor of a double-precision forward pass.
template <typename T>
T ReferenceFrameLoss(T z0, T z1, std::uint8_t label) {
  const T m = std::max(z0, z1);
  const T e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  const T p = (label ? e1 : e0) / (e0 + e1);
  return -std::log(std::max(p, T(1e-12)));
}

template <typename T>
T ReferenceLoss(const MlpModel &model, std::span<const Sequence> batch) {
  T total = 0;
  std::size_t frames = 0;
  for (const Sequence &seq : batch)
    for (Eigen::Index t = 0; t < seq.inputs.rows(); ++t, ++frames) {
      std::vector<T> a(static_cast<std::size_t>(seq.inputs.cols()));
      for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = (T(seq.inputs(t, i)) - T(model.norm.shift[i])) * T(model.norm.scale[i]);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer &layer = model.layers[l];
        std::vector<T> z(static_cast<std::size_t>(layer.w.rows()));
        for (std::size_t j = 0; j < z.size(); ++j) {
          z[j] = T(layer.b[j]);
          for (std::size_t i = 0; i < a.size(); ++i) z[j] += T(layer.w(j, i)) * a[i];
          if (l + 1 < model.layers.size()) z[j] = std::tanh(z[j]);
        }
        a = std::move(z);
      }
      total += ReferenceFrameLoss(a[0], a[1], seq.labels[t]);
    }
  return frames ? total / T(frames) : T(0);
}

template <typename T>
T ReferenceLoss(const LstmModel &model, std::span<const Sequence> batch) {
  auto sigmoid = [](T x) { return T(1) / (T(1) + std::exp(-x)); };
  T total = 0;
  std::size_t frames = 0;
  for (const Sequence &seq : batch) {
    std::vector<std::vector<T>> h, c;
    for (const auto &layer : model.layers) {
      h.emplace_back(static_cast<std::size_t>(layer.Hidden()), T(0));
      c.emplace_back(static_cast<std::size_t>(layer.Hidden()), T(0));
    }
    for (Eigen::Index t = 0; t < seq.inputs.rows(); ++t, ++frames) {
      std::vector<T> x(static_cast<std::size_t>(seq.inputs.cols()));
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = (T(seq.inputs(t, i)) - T(model.norm.shift[i])) * T(model.norm.scale[i]);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const LstmLayer &layer = model.layers[l];
        const std::size_t hid = h[l].size();
        std::vector<T> a(4 * hid);
        for (std::size_t r = 0; r < a.size(); ++r) {
          a[r] = T(layer.b[r]);
          for (std::size_t i = 0; i < x.size(); ++i) a[r] += T(layer.w(r, i)) * x[i];
          for (std::size_t j = 0; j < hid; ++j) a[r] += T(layer.u(r, j)) * h[l][j];
        }
        for (std::size_t k = 0; k < hid; ++k) {
          const T ig = sigmoid(a[k]), fg = sigmoid(a[hid + k]), og = sigmoid(a[2 * hid + k]);
          c[l][k] = fg * c[l][k] + ig * std::tanh(a[3 * hid + k]);
          h[l][k] = og * std::tanh(c[l][k]);
        }
        x = h[l];
      }
      T z[2];
      for (int o = 0; o < 2; ++o) {
        z[o] = T(model.out.b[o]);
        for (std::size_t k = 0; k < x.size(); ++k) z[o] += T(model.out.w(o, k)) * x[k];
      }
      total += ReferenceFrameLoss(z[0], z[1], seq.labels[t]);
    }
  }
  return frames ? total / T(frames) : T(0);
}

}  // namespace

double GradCheck(const SequenceModel &model, std::span<const Sequence> batch, double eps) {
  return std::visit(
      [&](const auto &m) {
        using Model = std::decay_t<decltype(m)>;
        Model work = m, grad;
        LossAndGradient(work, batch, &grad);
        auto params = Parameters(work);
        auto grads = Parameters(grad);
        double worst = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i)
          for (std::size_t j = 0; j < params[i].size(); ++j) {
            const double saved = params[i][j];
            params[i][j] = saved + eps;
            const long double up = ReferenceLoss<long double>(work, batch);
            params[i][j] = saved - eps;
            const long double down = ReferenceLoss<long double>(work, batch);
            params[i][j] = saved;
            // The perturbation actually applied, after rounding to double.
            const long double step = static_cast<long double>(saved + eps) -
                                     static_cast<long double>(saved - eps);
            const double numeric = static_cast<double>((up - down) / step);
            const double analytic = grads[i][j];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
          }
        return worst;
      },
      model);
}

void RoundToFloat(SequenceModel *model) {
  std::visit(
      [](auto &m) {
        for (auto s : Parameters(m))
          for (double &v : s) v = static_cast<float>(v);
        for (Vector *v : {&m.norm.shift, &m.norm.scale})
          for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = static_cast<float>((*v)[i]);
      },
      *model);
}

}  // namespace sdvad
