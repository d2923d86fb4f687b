// include/protospk/nnet.hpp

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

#ifndef PROTOSPK_NNET_HPP_
#define PROTOSPK_NNET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protospk/corpus.hpp"
#include "protospk/rng.hpp"

namespace protospk {

// Feed-forward encoder: per hidden layer, affine -> batch-norm -> ReLU ->
// dropout. The final hidden layer's output is the speaker representation.
// All arithmetic is double precision; gradients are exact reverse-mode
// derivatives of the traced computation, which is what makes the
// finite-difference test gates tight.

struct EncoderConfig {
  std::size_t input_dim = 128;
  std::vector<std::size_t> hidden_dims = {128, 64, 32};
  double dropout_p = 0.2;
  double batchnorm_momentum = 0.1;
  double batchnorm_eps = 1e-5;

  std::size_t embedding_dim() const { return hidden_dims.back(); }
  void validate() const;
};

struct LayerParams {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::VectorXd bias;
  Eigen::VectorXd bn_gamma;
  Eigen::VectorXd bn_beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct EncoderParams {
  EncoderConfig config;
  std::vector<LayerParams> layers;
};

/// Gradients for the trainable tensors of one layer (running stats are not
/// trained).
struct LayerGrads {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd bn_gamma;
  Eigen::VectorXd bn_beta;
};

struct EncoderGrads {
  std::vector<LayerGrads> layers;
};

enum class Mode {
  kTrain,             // batch statistics, dropout on, running stats updated
  kEval,              // running statistics, no dropout
  kTrainFrozenStats,  // running statistics, dropout on, no stats update
};

/// Cached activations of one Train-mode forward; consumed exactly once.
struct LayerTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd affine;
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd normalized;
  Eigen::MatrixXd bn_out;
  Eigen::MatrixXd dropout_scale;  // empty when dropout is inactive
  bool frozen_stats = false;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  bool consumed = false;
};

/// Glorot-uniform weights, zero biases and shifts, unit scales and running
/// variances. Deterministic per seed.
EncoderParams init_params(const EncoderConfig &config, std::uint64_t seed);

/// Runs the encoder on a batch (rows are samples). Train-ish modes need a
/// non-null rng when dropout_p > 0 and fill `trace` when given; kTrain
/// additionally updates the running statistics in place. Eval leaves params
/// untouched.
Eigen::MatrixXd forward(EncoderParams &params, const Eigen::MatrixXd &batch,
                        Mode mode, Rng *rng, ForwardTrace *trace);

/// Eval-mode forward without the mutation-capable signature.
Eigen::MatrixXd forward_eval(const EncoderParams &params,
                             const Eigen::MatrixXd &batch);

/// Reverse-mode gradients of the traced forward, given the loss gradient at
/// the embedding output. Also returns the gradient w.r.t. the batch itself
/// when `grad_input` is non-null (used by pair losses).
EncoderGrads backward(ForwardTrace &trace, const EncoderParams &params,
                      const Eigen::MatrixXd &grad_embeddings,
                      Eigen::MatrixXd *grad_input = nullptr);

// ---------------------------------------------------------------------------
// Optimizer. Works over flat views of named tensors so that model heads
// (softmax layer, similarity head) share the same update path.

struct TensorRef {
  std::string name;
  double *data = nullptr;
  std::size_t size = 0;
  std::vector<std::size_t> dims;  // row-major semantics for rank >= 2
};

std::vector<TensorRef> trainable_tensors(EncoderParams &params);
std::vector<TensorRef> trainable_tensors(EncoderGrads &grads);
/// Trainable tensors plus batch-norm running statistics (checkpoint payload).
std::vector<TensorRef> all_tensors(EncoderParams &params);

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState create(const std::vector<TensorRef> &params, double lr = 3e-4);
};

/// Bias-corrected Adam update, in place. Tensor order is the state's layout
/// contract; params and grads must enumerate matching shapes.
void adam_step(const std::vector<TensorRef> &params,
               const std::vector<TensorRef> &grads, AdamState &state);

// ---------------------------------------------------------------------------
// PNCK1 checkpoint container: named double tensors, little-endian.

struct LoadedTensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;
};

void write_tensor_file(const std::string &path,
                       const std::vector<TensorRef> &tensors);
std::map<std::string, LoadedTensor> read_tensor_file(const std::string &path);

void save_checkpoint(const EncoderParams &params, const std::string &path);
EncoderParams load_checkpoint(const std::string &path);

/// Rebuilds encoder params from an already-read tensor map (shared by the
/// classifier and siamese checkpoint formats, which add their own tensors).
EncoderParams encoder_from_tensor_map(
    const std::map<std::string, LoadedTensor> &tensors);

/// Stacks session utterances into an n x dim matrix, file order.
Eigen::MatrixXd session_matrix(const Session &session);

// ---------------------------------------------------------------------------
// Shared training log (protonet, siamese, baseline trainers).

struct TrainLogEntry {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::size_t best_epoch = 0;  // 1-based epoch whose params were returned
  double best_val_loss = 0.0;
  std::vector<std::string> warnings;
};

/// Writes a train log as CSV: epoch,train_loss,val_loss (shortest exact
/// decimal representation per value).
void write_trainlog_csv(const TrainLog &log, const std::string &path);

}  // namespace protospk

#endif  // PROTOSPK_NNET_HPP_
