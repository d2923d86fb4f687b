// src/siamese.cc

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

#include "protospk/siamese.hpp"

#include <cmath>
#include <limits>
#include <tuple>

#include "protospk/error.hpp"

namespace protospk {

void SiameseTrainConfig::validate() const {
  if (batch_pairs < 4 || batch_pairs % 4 != 0)
    throw Error("siamese config: batch_pairs must be a positive multiple of 4");
  if (max_epochs < 1) throw Error("siamese config: max_epochs must be >= 1");
  if (early_stop_patience >= max_epochs)
    throw Error("siamese config: early_stop_patience must be < max_epochs");
  if (!(lr >= 0.0)) throw Error("siamese config: lr must be >= 0");
  encoder.validate();
}

bool session_pairable(const Session &session) {
  return session.count(Speaker::kChild) >= 2 &&
         session.count(Speaker::kAdult) >= 2;
}

namespace {

Eigen::VectorXd utterance_vector(const Session &session, std::size_t index) {
  const std::vector<double> &e = session.utterances[index].embedding;
  return Eigen::Map<const Eigen::VectorXd>(e.data(),
                                           static_cast<Eigen::Index>(e.size()));
}

double sigmoid(double x) {
  // Branch keeps both exponentials bounded.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

PairBatch sample_pairs(const Session &session, std::size_t n_pairs, Rng &rng) {
  if (n_pairs < 4 || n_pairs % 4 != 0)
    throw Error("sample_pairs: n_pairs must be a positive multiple of 4");
  if (!session_pairable(session))
    throw Error("session " + session.session_id +
                " has fewer than 2 utterances in some class; cannot form pairs");

  const std::vector<std::size_t> child = session.class_indices(Speaker::kChild);
  const std::vector<std::size_t> adult = session.class_indices(Speaker::kAdult);
  const auto dim = static_cast<Eigen::Index>(
      session.utterances.front().embedding.size());

  PairBatch batch;
  batch.session_id = session.session_id;
  batch.a.resize(static_cast<Eigen::Index>(n_pairs), dim);
  batch.b.resize(static_cast<Eigen::Index>(n_pairs), dim);
  batch.labels.resize(static_cast<Eigen::Index>(n_pairs));

  Eigen::Index row = 0;
  auto same_class_pairs = [&](const std::vector<std::size_t> &pool,
                              std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::vector<std::size_t> pick =
          rng.sample_without_replacement(pool.size(), 2);
      batch.a.row(row) = utterance_vector(session, pool[pick[0]]).transpose();
      batch.b.row(row) = utterance_vector(session, pool[pick[1]]).transpose();
      batch.labels(row) = 1.0;
      ++row;
    }
  };
  // Draw order (child-child, adult-adult, child-adult) is pinned for
  // determinism.
  same_class_pairs(child, n_pairs / 4);
  same_class_pairs(adult, n_pairs / 4);
  for (std::size_t i = 0; i < n_pairs / 2; ++i) {
    const std::size_t ci = rng.uniform_below(child.size());
    const std::size_t ai = rng.uniform_below(adult.size());
    batch.a.row(row) = utterance_vector(session, child[ci]).transpose();
    batch.b.row(row) = utterance_vector(session, adult[ai]).transpose();
    batch.labels(row) = 0.0;
    ++row;
  }
  return batch;
}

double pair_score(const EncoderParams &params,
                  const SimilarityHeadParams &head, const Eigen::VectorXd &a,
                  const Eigen::VectorXd &b) {
  Eigen::MatrixXd stacked(2, a.size());
  stacked.row(0) = a.transpose();
  stacked.row(1) = b.transpose();
  Eigen::MatrixXd encoded = forward_eval(params, stacked);
  const Eigen::VectorXd diff =
      (encoded.row(0) - encoded.row(1)).cwiseAbs().transpose();
  return sigmoid(head.weight.dot(diff) + head.bias(0));
}

PairLossResult pair_bce_loss(const Eigen::MatrixXd &encoded_a,
                             const Eigen::MatrixXd &encoded_b,
                             const Eigen::VectorXd &labels,
                             const SimilarityHeadParams &head) {
  const Eigen::Index n = encoded_a.rows();
  if (encoded_b.rows() != n || labels.size() != n)
    throw Error("pair_bce_loss: batch parts disagree in length");
  if (n < 1) throw Error("pair_bce_loss: empty batch");

  PairLossResult result;
  result.grad_a = Eigen::MatrixXd::Zero(n, encoded_a.cols());
  result.grad_b = Eigen::MatrixXd::Zero(n, encoded_b.cols());
  result.grad_weight = Eigen::VectorXd::Zero(head.weight.size());
  result.grad_bias = Eigen::VectorXd::Zero(1);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd delta =
        (encoded_a.row(i) - encoded_b.row(i)).transpose();
    const Eigen::VectorXd abs_delta = delta.cwiseAbs();
    const double logit = head.weight.dot(abs_delta) + head.bias(0);
    const double y = labels(i);
    // BCE from the logit: max(l,0) - l*y + log(1 + exp(-|l|)).
    result.loss += inv_n * (std::max(logit, 0.0) - logit * y +
                            std::log1p(std::exp(-std::abs(logit))));
    const double dlogit = (sigmoid(logit) - y) * inv_n;
    result.grad_weight += dlogit * abs_delta;
    result.grad_bias(0) += dlogit;
    // d|delta|/d delta = sign(delta); the subgradient at 0 is taken as 0.
    const Eigen::VectorXd ddelta =
        dlogit * (head.weight.array() * delta.array().sign()).matrix();
    result.grad_a.row(i) = ddelta.transpose();
    result.grad_b.row(i) = -ddelta.transpose();
  }
  return result;
}

std::tuple<EncoderParams, SimilarityHeadParams, TrainLog> train_siamese(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const SiameseTrainConfig &config) {
  config.validate();
  TrainLog log;

  std::vector<const Session *> usable_train;
  for (const Session *s : train_sessions) {
    if (session_pairable(*s)) {
      usable_train.push_back(s);
    } else {
      log.warnings.push_back("session " + s->session_id +
                             " skipped: needs at least 2 utterances per class");
    }
  }
  if (usable_train.empty())
    throw Error("train_siamese: no usable train sessions");

  std::vector<const Session *> usable_val;
  for (const Session *s : validation_sessions) {
    if (session_pairable(*s)) {
      usable_val.push_back(s);
    } else {
      log.warnings.push_back("validation session " + s->session_id +
                             " skipped: needs at least 2 utterances per class");
    }
  }
  if (usable_val.empty())
    throw Error("train_siamese: no usable validation sessions");

  EncoderParams params = init_params(
      config.encoder, derive_seed(config.seed, seed_tag("siamese.init")));
  SimilarityHeadParams head;
  {
    // Head gets the same Glorot-uniform treatment (fan_in = M, fan_out = 1).
    Rng head_rng(derive_seed(config.seed, seed_tag("siamese.head.init")));
    const auto m = static_cast<Eigen::Index>(config.encoder.embedding_dim());
    const double a = std::sqrt(6.0 / (static_cast<double>(m) + 1.0));
    head.weight.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
      head.weight(i) = (2.0 * head_rng.uniform_double() - 1.0) * a;
    head.bias = Eigen::VectorXd::Zero(1);
  }

  auto model_tensors = [&](EncoderParams &enc, SimilarityHeadParams &h) {
    std::vector<TensorRef> tensors = trainable_tensors(enc);
    tensors.push_back(TensorRef{"head.weight", h.weight.data(),
                                static_cast<std::size_t>(h.weight.size()),
                                {static_cast<std::size_t>(h.weight.size())}});
    tensors.push_back(TensorRef{"head.bias", h.bias.data(), 1, {1}});
    return tensors;
  };
  AdamState adam = AdamState::create(model_tensors(params, head), config.lr);

  Rng run_rng(derive_seed(config.seed, seed_tag("siamese.batches")));
  Rng val_rng(derive_seed(config.seed, seed_tag("siamese.val.batches")));
  std::vector<PairBatch> val_batches;
  val_batches.reserve(usable_val.size());
  for (const Session *s : usable_val)
    val_batches.push_back(sample_pairs(*s, config.batch_pairs, val_rng));

  auto batch_loss = [&](const PairBatch &batch, const Eigen::MatrixXd &encoded) {
    const Eigen::Index n = batch.a.rows();
    return pair_bce_loss(encoded.topRows(n), encoded.bottomRows(n),
                         batch.labels, head);
  };

  EncoderParams best_params = params;
  SimilarityHeadParams best_head = head;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(usable_train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    run_rng.shuffle(order);
    double train_loss_sum = 0.0;
    for (std::size_t idx : order) {
      PairBatch batch =
          sample_pairs(*usable_train[idx], config.batch_pairs, run_rng);
      Eigen::MatrixXd stacked(batch.a.rows() + batch.b.rows(), batch.a.cols());
      stacked.topRows(batch.a.rows()) = batch.a;
      stacked.bottomRows(batch.b.rows()) = batch.b;
      ForwardTrace trace;
      Eigen::MatrixXd encoded =
          forward(params, stacked, Mode::kTrain, &run_rng, &trace);
      PairLossResult loss = batch_loss(batch, encoded);
      train_loss_sum += loss.loss;
      Eigen::MatrixXd grad_encoded(encoded.rows(), encoded.cols());
      grad_encoded.topRows(batch.a.rows()) = loss.grad_a;
      grad_encoded.bottomRows(batch.b.rows()) = loss.grad_b;
      EncoderGrads grads = backward(trace, params, grad_encoded);
      std::vector<TensorRef> grad_tensors = trainable_tensors(grads);
      grad_tensors.push_back(
          TensorRef{"head.weight", loss.grad_weight.data(),
                    static_cast<std::size_t>(loss.grad_weight.size()),
                    {static_cast<std::size_t>(loss.grad_weight.size())}});
      grad_tensors.push_back(
          TensorRef{"head.bias", loss.grad_bias.data(), 1, {1}});
      adam_step(model_tensors(params, head), grad_tensors, adam);
    }
    const double train_loss =
        train_loss_sum / static_cast<double>(order.size());

    double val_loss_sum = 0.0;
    for (const PairBatch &batch : val_batches) {
      Eigen::MatrixXd stacked(batch.a.rows() + batch.b.rows(), batch.a.cols());
      stacked.topRows(batch.a.rows()) = batch.a;
      stacked.bottomRows(batch.b.rows()) = batch.b;
      Eigen::MatrixXd encoded = forward_eval(params, stacked);
      val_loss_sum += batch_loss(batch, encoded).loss;
    }
    const double val_loss =
        val_loss_sum / static_cast<double>(val_batches.size());

    log.entries.push_back({epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_head = head;
      best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.early_stop_patience) break;
    }
  }

  log.best_epoch = best_epoch;
  log.best_val_loss = best_val;
  return {std::move(best_params), std::move(best_head), std::move(log)};
}

void save_siamese_checkpoint(const EncoderParams &params,
                             const SimilarityHeadParams &head,
                             const std::string &path) {
  auto tensors = all_tensors(const_cast<EncoderParams &>(params));
  auto &h = const_cast<SimilarityHeadParams &>(head);
  tensors.push_back(TensorRef{"head.weight", h.weight.data(),
                              static_cast<std::size_t>(h.weight.size()),
                              {static_cast<std::size_t>(h.weight.size())}});
  tensors.push_back(TensorRef{"head.bias", h.bias.data(), 1, {1}});
  std::vector<double> hyper = {params.config.dropout_p,
                               params.config.batchnorm_momentum,
                               params.config.batchnorm_eps};
  tensors.push_back(TensorRef{"hyper", hyper.data(), hyper.size(), {3}});
  write_tensor_file(path, tensors);
}

std::pair<EncoderParams, SimilarityHeadParams> load_siamese_checkpoint(
    const std::string &path) {
  const auto tensors = read_tensor_file(path);
  EncoderParams params = encoder_from_tensor_map(tensors);
  auto w = tensors.find("head.weight");
  auto b = tensors.find("head.bias");
  if (w == tensors.end() || b == tensors.end())
    throw Error(path + ": missing similarity head tensors");
  if (w->second.dims != std::vector<std::size_t>{params.config.embedding_dim()})
    throw Error(path + ": head.weight shape mismatch vs embedded config");
  if (b->second.dims != std::vector<std::size_t>{1})
    throw Error(path + ": head.bias shape mismatch vs embedded config");
  SimilarityHeadParams head;
  head.weight = Eigen::Map<const Eigen::VectorXd>(
      w->second.data.data(), static_cast<Eigen::Index>(w->second.data.size()));
  head.bias = Eigen::Map<const Eigen::VectorXd>(b->second.data.data(), 1);
  return {std::move(params), std::move(head)};
}

}  // namespace protospk
