// src/nnet.cc

// Copyright 2026  The Protospk Authors

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

#include "protospk/nnet.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "protospk/error.hpp"
#include "protospk/textio.hpp"

namespace protospk {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

void EncoderConfig::validate() const {
  if (input_dim < 1) throw Error("encoder config: input_dim must be >= 1");
  if (hidden_dims.empty())
    throw Error("encoder config: at least one hidden layer is required");
  for (std::size_t d : hidden_dims)
    if (d < 1) throw Error("encoder config: hidden layer widths must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw Error("encoder config: dropout_p must lie in [0, 1)");
  if (!(batchnorm_momentum > 0.0 && batchnorm_momentum < 1.0))
    throw Error("encoder config: batchnorm_momentum must lie in (0, 1)");
  if (!(batchnorm_eps > 0.0))
    throw Error("encoder config: batchnorm_eps must be > 0");
}

EncoderParams init_params(const EncoderConfig &config, std::uint64_t seed) {
  config.validate();
  EncoderParams params;
  params.config = config;
  Rng rng(seed);
  std::size_t fan_in = config.input_dim;
  for (std::size_t fan_out : config.hidden_dims) {
    LayerParams layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_in),
                        static_cast<Eigen::Index>(fan_out));
    const double a =
        std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
    // Row-major draw order (by input unit, then output unit) is part of the
    // determinism contract.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = (2.0 * rng.uniform_double() - 1.0) * a;
    const auto out = static_cast<Eigen::Index>(fan_out);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.bn_gamma = Eigen::VectorXd::Ones(out);
    layer.bn_beta = Eigen::VectorXd::Zero(out);
    layer.running_mean = Eigen::VectorXd::Zero(out);
    layer.running_var = Eigen::VectorXd::Ones(out);
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return params;
}

Eigen::MatrixXd forward(EncoderParams &params, const Eigen::MatrixXd &batch,
                        Mode mode, Rng *rng, ForwardTrace *trace) {
  const bool train_stats = mode == Mode::kTrain;
  const bool dropout_active =
      (mode == Mode::kTrain || mode == Mode::kTrainFrozenStats) &&
      params.config.dropout_p > 0.0;
  if (batch.cols() != static_cast<Eigen::Index>(params.config.input_dim))
    throw Error("forward: batch width does not match encoder input_dim");
  if (batch.rows() < 1) throw Error("forward: empty batch");
  if (train_stats && batch.rows() < 2)
    throw Error("forward: train mode needs at least 2 rows for batch statistics");
  if (dropout_active && rng == nullptr)
    throw Error("forward: dropout requires an rng in training modes");
  if (trace != nullptr) {
    trace->layers.clear();
    trace->consumed = false;
  }

  const double p = params.config.dropout_p;
  const double momentum = params.config.batchnorm_momentum;
  const double eps = params.config.batchnorm_eps;
  const auto n = static_cast<double>(batch.rows());

  Eigen::MatrixXd x = batch;
  for (LayerParams &layer : params.layers) {
    LayerTrace lt;
    lt.frozen_stats = !train_stats;
    if (trace != nullptr) lt.input = x;

    Eigen::MatrixXd z = x * layer.weight;
    z.rowwise() += layer.bias.transpose();

    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    if (train_stats) {
      mean = z.colwise().mean().transpose();
      Eigen::MatrixXd centered = z.rowwise() - mean.transpose();
      var = centered.array().square().matrix().colwise().mean().transpose();
      // Normalization uses the biased variance; running statistics keep the
      // unbiased estimate.
      layer.running_mean =
          (1.0 - momentum) * layer.running_mean + momentum * mean;
      layer.running_var = (1.0 - momentum) * layer.running_var +
                          momentum * (var * (n / (n - 1.0)));
    } else {
      mean = layer.running_mean;
      var = layer.running_var;
    }
    Eigen::VectorXd inv_std = (var.array() + eps).rsqrt().matrix();
    Eigen::MatrixXd normalized =
        ((z.rowwise() - mean.transpose()).array().rowwise() *
         inv_std.transpose().array())
            .matrix();
    Eigen::MatrixXd y =
        (normalized.array().rowwise() * layer.bn_gamma.transpose().array())
            .matrix();
    y.rowwise() += layer.bn_beta.transpose();

    Eigen::MatrixXd activated = y.cwiseMax(0.0);

    if (dropout_active) {
      // Inverted dropout: kept units are scaled by 1/(1-p) so eval needs no
      // rescaling. Mask draw order is row-major over the batch.
      Eigen::MatrixXd scale(activated.rows(), activated.cols());
      const double keep_scale = 1.0 / (1.0 - p);
      for (Eigen::Index r = 0; r < scale.rows(); ++r)
        for (Eigen::Index c = 0; c < scale.cols(); ++c)
          scale(r, c) = rng->uniform_double() >= p ? keep_scale : 0.0;
      activated.array() *= scale.array();
      if (trace != nullptr) lt.dropout_scale = std::move(scale);
    }

    if (trace != nullptr) {
      lt.affine = std::move(z);
      lt.mean = std::move(mean);
      lt.inv_std = std::move(inv_std);
      lt.normalized = std::move(normalized);
      lt.bn_out = std::move(y);
      trace->layers.push_back(std::move(lt));
    }
    x = std::move(activated);
  }
  return x;
}

Eigen::MatrixXd forward_eval(const EncoderParams &params,
                             const Eigen::MatrixXd &batch) {
  // Eval mode never mutates params; the const_cast is safe.
  return forward(const_cast<EncoderParams &>(params), batch, Mode::kEval,
                 nullptr, nullptr);
}

EncoderGrads backward(ForwardTrace &trace, const EncoderParams &params,
                      const Eigen::MatrixXd &grad_embeddings,
                      Eigen::MatrixXd *grad_input) {
  if (trace.consumed) throw Error("backward: forward trace already consumed");
  if (trace.layers.size() != params.layers.size())
    throw Error("backward: trace does not match encoder depth");
  trace.consumed = true;

  EncoderGrads grads;
  grads.layers.resize(params.layers.size());
  Eigen::MatrixXd g = grad_embeddings;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams &layer = params.layers[li];
    LayerTrace &lt = trace.layers[li];
    LayerGrads &lg = grads.layers[li];

    if (lt.dropout_scale.size() > 0) g.array() *= lt.dropout_scale.array();
    g.array() *= (lt.bn_out.array() > 0.0).cast<double>();

    lg.bn_beta = g.colwise().sum().transpose();
    lg.bn_gamma = (g.array() * lt.normalized.array())
                      .matrix()
                      .colwise()
                      .sum()
                      .transpose();

    Eigen::MatrixXd gx_hat =
        (g.array().rowwise() * layer.bn_gamma.transpose().array()).matrix();

    Eigen::MatrixXd dz;
    if (lt.frozen_stats) {
      dz = (gx_hat.array().rowwise() * lt.inv_std.transpose().array()).matrix();
    } else {
      const auto n = static_cast<double>(g.rows());
      Eigen::MatrixXd centered = lt.affine.rowwise() - lt.mean.transpose();
      Eigen::VectorXd inv_std3 =
          (lt.inv_std.array() * lt.inv_std.array() * lt.inv_std.array())
              .matrix();
      Eigen::VectorXd gc_sum = (gx_hat.array() * centered.array())
                                   .matrix()
                                   .colwise()
                                   .sum()
                                   .transpose();
      Eigen::VectorXd dvar =
          (gc_sum.array() * (-0.5) * inv_std3.array()).matrix();
      // The second mean term vanishes analytically (column sums of the
      // centered affine are zero) but is kept so the backward pass is the
      // exact derivative of the computed forward.
      Eigen::VectorXd gx_col_sum = gx_hat.colwise().sum().transpose();
      Eigen::VectorXd centered_col_sum = centered.colwise().sum().transpose();
      Eigen::VectorXd dmean =
          (-(gx_col_sum.array() * lt.inv_std.array()) +
           dvar.array() * (-2.0 / n) * centered_col_sum.array())
              .matrix();
      dz = (gx_hat.array().rowwise() * lt.inv_std.transpose().array()).matrix() +
           (centered.array().rowwise() * (dvar.transpose().array() * (2.0 / n)))
               .matrix();
      dz.rowwise() += (dmean / n).transpose();
    }

    lg.weight = lt.input.transpose() * dz;
    lg.bias = dz.colwise().sum().transpose();
    if (li > 0 || grad_input != nullptr) g = dz * layer.weight.transpose();
    if (li == 0 && grad_input != nullptr) *grad_input = g;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Tensor views.

static TensorRef matrix_ref(const std::string &name, Eigen::MatrixXd &m) {
  // Note: data() exposes Eigen's column-major buffer; dims record the logical
  // row-major shape, so checkpoint writes go element-by-element instead.
  return TensorRef{name, m.data(), static_cast<std::size_t>(m.size()),
                   {static_cast<std::size_t>(m.rows()),
                    static_cast<std::size_t>(m.cols())}};
}

static TensorRef vector_ref(const std::string &name, Eigen::VectorXd &v) {
  return TensorRef{name, v.data(), static_cast<std::size_t>(v.size()),
                   {static_cast<std::size_t>(v.size())}};
}

std::vector<TensorRef> trainable_tensors(EncoderParams &params) {
  std::vector<TensorRef> out;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string base = "layer" + std::to_string(i) + ".";
    LayerParams &l = params.layers[i];
    out.push_back(matrix_ref(base + "weight", l.weight));
    out.push_back(vector_ref(base + "bias", l.bias));
    out.push_back(vector_ref(base + "bn_gamma", l.bn_gamma));
    out.push_back(vector_ref(base + "bn_beta", l.bn_beta));
  }
  return out;
}

std::vector<TensorRef> trainable_tensors(EncoderGrads &grads) {
  std::vector<TensorRef> out;
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const std::string base = "layer" + std::to_string(i) + ".";
    LayerGrads &l = grads.layers[i];
    out.push_back(matrix_ref(base + "weight", l.weight));
    out.push_back(vector_ref(base + "bias", l.bias));
    out.push_back(vector_ref(base + "bn_gamma", l.bn_gamma));
    out.push_back(vector_ref(base + "bn_beta", l.bn_beta));
  }
  return out;
}

std::vector<TensorRef> all_tensors(EncoderParams &params) {
  std::vector<TensorRef> out = trainable_tensors(params);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string base = "layer" + std::to_string(i) + ".";
    LayerParams &l = params.layers[i];
    out.push_back(vector_ref(base + "running_mean", l.running_mean));
    out.push_back(vector_ref(base + "running_var", l.running_var));
  }
  return out;
}

AdamState AdamState::create(const std::vector<TensorRef> &params, double lr) {
  AdamState state;
  state.lr = lr;
  for (const TensorRef &t : params) {
    state.m.emplace_back(t.size, 0.0);
    state.v.emplace_back(t.size, 0.0);
  }
  return state;
}

void adam_step(const std::vector<TensorRef> &params,
               const std::vector<TensorRef> &grads, AdamState &state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw Error("adam_step: tensor list does not match optimizer state");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size || params[i].size != state.m[i].size())
      throw Error("adam_step: shape mismatch for tensor " + params[i].name);
    double *theta = params[i].data;
    const double *grad = grads[i].data;
    double *m = state.m[i].data();
    double *v = state.v[i].data();
    for (std::size_t j = 0; j < params[i].size; ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// PNCK1 tensor files.

namespace {

constexpr char kMagic[6] = {'P', 'N', 'C', 'K', '1', '\0'};

void write_bytes(std::ofstream &out, const void *data, std::size_t len) {
  out.write(static_cast<const char *>(data), static_cast<std::streamsize>(len));
}

void write_u16(std::ofstream &out, std::uint16_t v) { write_bytes(out, &v, 2); }
void write_u32(std::ofstream &out, std::uint32_t v) { write_bytes(out, &v, 4); }
void write_f64(std::ofstream &out, double v) { write_bytes(out, &v, 8); }

void read_bytes(std::ifstream &in, void *data, std::size_t len,
                const std::string &path) {
  in.read(static_cast<char *>(data), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in.gcount()) != len)
    throw Error(path + ": truncated checkpoint file");
}

std::uint16_t read_u16(std::ifstream &in, const std::string &path) {
  std::uint16_t v;
  read_bytes(in, &v, 2, path);
  return v;
}
std::uint32_t read_u32(std::ifstream &in, const std::string &path) {
  std::uint32_t v;
  read_bytes(in, &v, 4, path);
  return v;
}
double read_f64(std::ifstream &in, const std::string &path) {
  double v;
  read_bytes(in, &v, 8, path);
  return v;
}

}  // namespace

void write_tensor_file(const std::string &path,
                       const std::vector<TensorRef> &tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  write_bytes(out, kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const TensorRef &t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw Error("tensor name too long: " + t.name);
    write_u16(out, static_cast<std::uint16_t>(t.name.size()));
    write_bytes(out, t.name.data(), t.name.size());
    write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    std::size_t total = 1;
    for (std::size_t d : t.dims) {
      write_u32(out, static_cast<std::uint32_t>(d));
      total *= d;
    }
    if (total != t.size)
      throw Error("tensor dims do not cover its element count: " + t.name);
    if (t.dims.size() == 2) {
      // Values are serialized row-major; the in-memory Eigen buffer is
      // column-major, so index explicitly.
      const std::size_t rows = t.dims[0], cols = t.dims[1];
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          write_f64(out, t.data[c * rows + r]);
    } else {
      for (std::size_t j = 0; j < t.size; ++j) write_f64(out, t.data[j]);
    }
  }
  if (!out) throw Error(path + ": write failed");
}

std::map<std::string, LoadedTensor> read_tensor_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open for reading");
  char magic[6];
  read_bytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error(path + ": magic mismatch (not a PNCK1 checkpoint)");
  const std::uint32_t count = read_u32(in, path);
  std::map<std::string, LoadedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = read_u16(in, path);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len, path);
    const std::uint32_t rank = read_u32(in, path);
    if (rank > 8) throw Error(path + ": implausible tensor rank");
    LoadedTensor tensor;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = read_u32(in, path);
      tensor.dims.push_back(dim);
      total *= dim;
    }
    tensor.data.resize(total);
    for (std::size_t j = 0; j < total; ++j) tensor.data[j] = read_f64(in, path);
    if (!out.emplace(std::move(name), std::move(tensor)).second)
      throw Error(path + ": duplicate tensor name");
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw Error(path + ": trailing bytes after last tensor");
  return out;
}

void save_checkpoint(const EncoderParams &params, const std::string &path) {
  auto tensors = all_tensors(const_cast<EncoderParams &>(params));
  std::vector<double> hyper = {params.config.dropout_p,
                               params.config.batchnorm_momentum,
                               params.config.batchnorm_eps};
  tensors.push_back(TensorRef{"hyper", hyper.data(), hyper.size(), {3}});
  write_tensor_file(path, tensors);
}

static const LoadedTensor &require_tensor(
    const std::map<std::string, LoadedTensor> &tensors, const std::string &name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error("checkpoint: missing tensor " + name);
  return it->second;
}

EncoderParams encoder_from_tensor_map(
    const std::map<std::string, LoadedTensor> &tensors) {
  const LoadedTensor &hyper = require_tensor(tensors, "hyper");
  if (hyper.dims != std::vector<std::size_t>{3})
    throw Error("checkpoint: hyper tensor must have shape [3]");

  EncoderParams params;
  params.config.dropout_p = hyper.data[0];
  params.config.batchnorm_momentum = hyper.data[1];
  params.config.batchnorm_eps = hyper.data[2];
  params.config.hidden_dims.clear();

  for (std::size_t i = 0;; ++i) {
    const std::string base = "layer" + std::to_string(i) + ".";
    if (tensors.find(base + "weight") == tensors.end()) break;
    const LoadedTensor &w = require_tensor(tensors, base + "weight");
    if (w.dims.size() != 2)
      throw Error("checkpoint: " + base + "weight must be rank 2");
    const std::size_t fan_in = w.dims[0], fan_out = w.dims[1];
    if (i == 0) {
      params.config.input_dim = fan_in;
    } else if (fan_in != params.config.hidden_dims.back()) {
      throw Error("checkpoint: shape mismatch vs embedded config at " + base +
                  "weight");
    }
    params.config.hidden_dims.push_back(fan_out);

    LayerParams layer;
    layer.weight.resize(static_cast<Eigen::Index>(fan_in),
                        static_cast<Eigen::Index>(fan_out));
    for (std::size_t r = 0; r < fan_in; ++r)
      for (std::size_t c = 0; c < fan_out; ++c)
        layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            w.data[r * fan_out + c];
    auto load_vec = [&](const std::string &name, Eigen::VectorXd &dst) {
      const LoadedTensor &t = require_tensor(tensors, base + name);
      if (t.dims != std::vector<std::size_t>{fan_out})
        throw Error("checkpoint: shape mismatch vs embedded config at " + base +
                    name);
      dst = Eigen::Map<const Eigen::VectorXd>(
          t.data.data(), static_cast<Eigen::Index>(fan_out));
    };
    load_vec("bias", layer.bias);
    load_vec("bn_gamma", layer.bn_gamma);
    load_vec("bn_beta", layer.bn_beta);
    load_vec("running_mean", layer.running_mean);
    load_vec("running_var", layer.running_var);
    params.layers.push_back(std::move(layer));
  }
  if (params.layers.empty())
    throw Error("checkpoint: no encoder layers found");
  params.config.validate();
  return params;
}

EncoderParams load_checkpoint(const std::string &path) {
  return encoder_from_tensor_map(read_tensor_file(path));
}

void write_trainlog_csv(const TrainLog &log, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << "epoch,train_loss,val_loss\n";
  for (const TrainLogEntry &e : log.entries)
    out << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.val_loss) << '\n';
  if (!out) throw Error(path + ": write failed");
}

Eigen::MatrixXd session_matrix(const Session &session) {
  if (session.utterances.empty())
    throw Error("session " + session.session_id + " has no utterances");
  const auto dim =
      static_cast<Eigen::Index>(session.utterances.front().embedding.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(session.utterances.size()), dim);
  for (std::size_t i = 0; i < session.utterances.size(); ++i) {
    const std::vector<double> &e = session.utterances[i].embedding;
    if (static_cast<Eigen::Index>(e.size()) != dim)
      throw Error("session " + session.session_id +
                  " has inconsistent embedding widths");
    m.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(e.data(), dim).transpose();
  }
  return m;
}

}  // namespace protospk
