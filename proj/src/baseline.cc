// src/baseline.cc

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

#include "protospk/baseline.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"

namespace protospk {

void BaseTrainConfig::validate() const {
  if (batch_size < 2)
    throw Error("base config: batch_size must be >= 2 (batch statistics)");
  if (max_epochs < 1) throw Error("base config: max_epochs must be >= 1");
  if (early_stop_patience >= max_epochs)
    throw Error("base config: early_stop_patience must be < max_epochs");
  if (!(lr >= 0.0)) throw Error("base config: lr must be >= 0");
  encoder.validate();
}

namespace {

constexpr int kChildColumn = 0;
constexpr int kAdultColumn = 1;

}  // namespace

CrossEntropy softmax_cross_entropy(const Eigen::MatrixXd &logits,
                                   const std::vector<int> &labels) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error("cross entropy: logits and labels disagree in length");
  CrossEntropy result;
  result.grad_logits = Eigen::MatrixXd::Zero(n, 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l0 = logits(i, 0), l1 = logits(i, 1);
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    const double z = e0 + e1;
    const double log_z = m + std::log(z);
    result.loss += inv_n * (log_z - logits(i, labels[i]));
    result.grad_logits(i, 0) = (e0 / z - (labels[i] == 0 ? 1.0 : 0.0)) * inv_n;
    result.grad_logits(i, 1) = (e1 / z - (labels[i] == 1 ? 1.0 : 0.0)) * inv_n;
  }
  return result;
}

namespace {

std::vector<TensorRef> classifier_tensors(ClassifierParams &params) {
  std::vector<TensorRef> tensors = trainable_tensors(params.encoder);
  tensors.push_back(
      TensorRef{"softmax.weight", params.w_out.data(),
                static_cast<std::size_t>(params.w_out.size()),
                {static_cast<std::size_t>(params.w_out.rows()),
                 static_cast<std::size_t>(params.w_out.cols())}});
  tensors.push_back(TensorRef{"softmax.bias", params.b_out.data(),
                              static_cast<std::size_t>(params.b_out.size()),
                              {static_cast<std::size_t>(params.b_out.size())}});
  return tensors;
}

/// Pooled utterances of several sessions, file order, with 0/1 class labels.
struct Pool {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};

Pool pool_sessions(const std::vector<const Session *> &sessions,
                   const char *what) {
  std::size_t total = 0;
  for (const Session *s : sessions) total += s->utterances.size();
  if (total == 0) throw Error(std::string("train_base: empty ") + what + " set");
  const auto dim = static_cast<Eigen::Index>(
      sessions.front()->utterances.front().embedding.size());
  Pool pool;
  pool.points.resize(static_cast<Eigen::Index>(total), dim);
  pool.labels.reserve(total);
  Eigen::Index row = 0;
  for (const Session *s : sessions)
    for (const Utterance &u : s->utterances) {
      pool.points.row(row++) = Eigen::Map<const Eigen::VectorXd>(
                                   u.embedding.data(), dim)
                                   .transpose();
      pool.labels.push_back(u.speaker == Speaker::kChild ? kChildColumn
                                                         : kAdultColumn);
    }
  return pool;
}

}  // namespace

std::pair<ClassifierParams, TrainLog> train_base(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const BaseTrainConfig &config) {
  config.validate();
  if (train_sessions.empty()) throw Error("train_base: no train sessions");
  if (validation_sessions.empty())
    throw Error("train_base: no validation sessions");
  TrainLog log;

  Pool train_pool = pool_sessions(train_sessions, "train");
  Pool val_pool = pool_sessions(validation_sessions, "validation");

  ClassifierParams params;
  params.encoder = init_params(
      config.encoder, derive_seed(config.seed, seed_tag("base.init")));
  {
    Rng out_rng(derive_seed(config.seed, seed_tag("base.softmax.init")));
    const auto m = static_cast<Eigen::Index>(config.encoder.embedding_dim());
    const double a = std::sqrt(6.0 / (static_cast<double>(m) + 2.0));
    params.w_out.resize(m, 2);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < 2; ++c)
        params.w_out(r, c) = (2.0 * out_rng.uniform_double() - 1.0) * a;
    params.b_out = Eigen::VectorXd::Zero(2);
  }
  AdamState adam = AdamState::create(classifier_tensors(params), config.lr);
  Rng run_rng(derive_seed(config.seed, seed_tag("base.batches")));

  ClassifierParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(
      static_cast<std::size_t>(train_pool.points.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    run_rng.shuffle(order);
    double train_loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      // A trailing single-row sliver cannot provide batch statistics; drop it.
      if (end - start < 2) continue;
      const auto rows = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd batch(rows, train_pool.points.cols());
      std::vector<int> labels(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.row(static_cast<Eigen::Index>(i - start)) =
            train_pool.points.row(static_cast<Eigen::Index>(order[i]));
        labels[i - start] = train_pool.labels[order[i]];
      }
      ForwardTrace trace;
      Eigen::MatrixXd encoded =
          forward(params.encoder, batch, Mode::kTrain, &run_rng, &trace);
      Eigen::MatrixXd logits = encoded * params.w_out;
      logits.rowwise() += params.b_out.transpose();
      CrossEntropy ce = softmax_cross_entropy(logits, labels);
      train_loss_sum += ce.loss;
      ++n_batches;

      Eigen::MatrixXd grad_w = encoded.transpose() * ce.grad_logits;
      Eigen::VectorXd grad_b = ce.grad_logits.colwise().sum().transpose();
      Eigen::MatrixXd grad_encoded = ce.grad_logits * params.w_out.transpose();
      EncoderGrads grads = backward(trace, params.encoder, grad_encoded);
      std::vector<TensorRef> grad_tensors = trainable_tensors(grads);
      grad_tensors.push_back(
          TensorRef{"softmax.weight", grad_w.data(),
                    static_cast<std::size_t>(grad_w.size()),
                    {static_cast<std::size_t>(grad_w.rows()),
                     static_cast<std::size_t>(grad_w.cols())}});
      grad_tensors.push_back(
          TensorRef{"softmax.bias", grad_b.data(),
                    static_cast<std::size_t>(grad_b.size()),
                    {static_cast<std::size_t>(grad_b.size())}});
      adam_step(classifier_tensors(params), grad_tensors, adam);
    }
    if (n_batches == 0) throw Error("train_base: train set smaller than 2 rows");
    const double train_loss = train_loss_sum / static_cast<double>(n_batches);

    Eigen::MatrixXd val_encoded = forward_eval(params.encoder, val_pool.points);
    Eigen::MatrixXd val_logits = val_encoded * params.w_out;
    val_logits.rowwise() += params.b_out.transpose();
    const double val_loss =
        softmax_cross_entropy(val_logits, val_pool.labels).loss;

    log.entries.push_back({epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.early_stop_patience) break;
    }
  }

  log.best_epoch = best_epoch;
  log.best_val_loss = best_val;
  return {std::move(best_params), std::move(log)};
}

Eigen::MatrixXd classifier_posteriors(const ClassifierParams &params,
                                      const Eigen::MatrixXd &batch) {
  Eigen::MatrixXd encoded = forward_eval(params.encoder, batch);
  Eigen::MatrixXd logits = encoded * params.w_out;
  logits.rowwise() += params.b_out.transpose();
  Eigen::MatrixXd probs(logits.rows(), 2);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = std::max(logits(i, 0), logits(i, 1));
    const double e0 = std::exp(logits(i, 0) - m);
    const double e1 = std::exp(logits(i, 1) - m);
    probs(i, 0) = e0 / (e0 + e1);
    probs(i, 1) = e1 / (e0 + e1);
  }
  return probs;
}

std::vector<Speaker> predict(const ClassifierParams &params,
                             const Eigen::MatrixXd &batch) {
  Eigen::MatrixXd encoded = forward_eval(params.encoder, batch);
  Eigen::MatrixXd logits = encoded * params.w_out;
  logits.rowwise() += params.b_out.transpose();
  std::vector<Speaker> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    // Exact ties go to Child by contract.
    out.push_back(logits(i, kChildColumn) >= logits(i, kAdultColumn)
                      ? Speaker::kChild
                      : Speaker::kAdult);
  return out;
}

ClassifierParams finetune(const ClassifierParams &params,
                          const Session &session,
                          const std::vector<std::size_t> &child_shots,
                          const std::vector<std::size_t> &adult_shots,
                          std::size_t n_steps, double lr, std::uint64_t seed) {
  if (child_shots.empty() || adult_shots.empty())
    throw Error("finetune: both classes need at least one shot");
  std::set<std::size_t> seen;
  auto check = [&](const std::vector<std::size_t> &shots, Speaker speaker) {
    for (std::size_t idx : shots) {
      if (idx >= session.utterances.size())
        throw Error("finetune: shot index out of range");
      if (session.utterances[idx].speaker != speaker)
        throw Error("finetune: shot index labeled with wrong class");
      if (!seen.insert(idx).second)
        throw Error("finetune: duplicate shot index");
    }
  };
  check(child_shots, Speaker::kChild);
  check(adult_shots, Speaker::kAdult);

  const auto dim = static_cast<Eigen::Index>(
      session.utterances.front().embedding.size());
  Eigen::MatrixXd batch(
      static_cast<Eigen::Index>(child_shots.size() + adult_shots.size()), dim);
  std::vector<int> labels;
  Eigen::Index row = 0;
  for (std::size_t idx : child_shots) {
    batch.row(row++) = Eigen::Map<const Eigen::VectorXd>(
                           session.utterances[idx].embedding.data(), dim)
                           .transpose();
    labels.push_back(kChildColumn);
  }
  for (std::size_t idx : adult_shots) {
    batch.row(row++) = Eigen::Map<const Eigen::VectorXd>(
                           session.utterances[idx].embedding.data(), dim)
                           .transpose();
    labels.push_back(kAdultColumn);
  }

  ClassifierParams tuned = params;  // value copy; the input stays untouched
  AdamState adam = AdamState::create(classifier_tensors(tuned), lr);
  Rng rng(derive_seed(seed, seed_tag("finetune")));
  for (std::size_t step = 0; step < n_steps; ++step) {
    ForwardTrace trace;
    // Frozen batch-norm statistics: a 10-shot batch is too small to restate
    // the normalization. Dropout stays active.
    Eigen::MatrixXd encoded =
        forward(tuned.encoder, batch, Mode::kTrainFrozenStats, &rng, &trace);
    Eigen::MatrixXd logits = encoded * tuned.w_out;
    logits.rowwise() += tuned.b_out.transpose();
    CrossEntropy ce = softmax_cross_entropy(logits, labels);
    Eigen::MatrixXd grad_w = encoded.transpose() * ce.grad_logits;
    Eigen::VectorXd grad_b = ce.grad_logits.colwise().sum().transpose();
    Eigen::MatrixXd grad_encoded = ce.grad_logits * tuned.w_out.transpose();
    EncoderGrads grads = backward(trace, tuned.encoder, grad_encoded);
    std::vector<TensorRef> grad_tensors = trainable_tensors(grads);
    grad_tensors.push_back(
        TensorRef{"softmax.weight", grad_w.data(),
                  static_cast<std::size_t>(grad_w.size()),
                  {static_cast<std::size_t>(grad_w.rows()),
                   static_cast<std::size_t>(grad_w.cols())}});
    grad_tensors.push_back(TensorRef{"softmax.bias", grad_b.data(),
                                     static_cast<std::size_t>(grad_b.size()),
                                     {static_cast<std::size_t>(grad_b.size())}});
    adam_step(classifier_tensors(tuned), grad_tensors, adam);
  }
  return tuned;
}

void save_classifier_checkpoint(const ClassifierParams &params,
                                const std::string &path) {
  auto &p = const_cast<ClassifierParams &>(params);
  auto tensors = all_tensors(p.encoder);
  tensors.push_back(
      TensorRef{"softmax.weight", p.w_out.data(),
                static_cast<std::size_t>(p.w_out.size()),
                {static_cast<std::size_t>(p.w_out.rows()),
                 static_cast<std::size_t>(p.w_out.cols())}});
  tensors.push_back(TensorRef{"softmax.bias", p.b_out.data(),
                              static_cast<std::size_t>(p.b_out.size()),
                              {static_cast<std::size_t>(p.b_out.size())}});
  std::vector<double> hyper = {params.encoder.config.dropout_p,
                               params.encoder.config.batchnorm_momentum,
                               params.encoder.config.batchnorm_eps};
  tensors.push_back(TensorRef{"hyper", hyper.data(), hyper.size(), {3}});
  write_tensor_file(path, tensors);
}

ClassifierParams load_classifier_checkpoint(const std::string &path) {
  const auto tensors = read_tensor_file(path);
  ClassifierParams params;
  params.encoder = encoder_from_tensor_map(tensors);
  auto w = tensors.find("softmax.weight");
  auto b = tensors.find("softmax.bias");
  if (w == tensors.end() || b == tensors.end())
    throw Error(path + ": missing softmax layer tensors");
  const std::size_t m = params.encoder.config.embedding_dim();
  if (w->second.dims != std::vector<std::size_t>{m, 2})
    throw Error(path + ": softmax.weight shape mismatch vs embedded config");
  if (b->second.dims != std::vector<std::size_t>{2})
    throw Error(path + ": softmax.bias shape mismatch vs embedded config");
  params.w_out.resize(static_cast<Eigen::Index>(m), 2);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      params.w_out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          w->second.data[r * 2 + c];
  params.b_out = Eigen::Map<const Eigen::VectorXd>(b->second.data.data(), 2);
  return params;
}

}  // namespace protospk
