// include/protospk/siamese.hpp

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

#ifndef PROTOSPK_SIAMESE_HPP_
#define PROTOSPK_SIAMESE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "protospk/corpus.hpp"
#include "protospk/nnet.hpp"
#include "protospk/rng.hpp"

namespace protospk {

// Pairwise metric-learning baseline: a shared encoder feeds a learned
// similarity head s = sigmoid(w . |e_a - e_b| + b), trained with binary
// cross-entropy on same/different speaker pairs drawn within sessions.

/// A batch of within-session pairs. Row i of `a` pairs with row i of `b`;
/// label 1 means same speaker class. Row layout: child-child pairs, then
/// adult-adult, then child-adult.
struct PairBatch {
  std::string session_id;
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::VectorXd labels;  // entries in {0, 1}
};

struct SimilarityHeadParams {
  Eigen::VectorXd weight;  // length M
  Eigen::VectorXd bias;    // length 1
};

struct SiameseTrainConfig {
  std::size_t batch_pairs = 128;  // pairs per session batch; multiple of 4
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 20;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  EncoderConfig encoder;

  void validate() const;
};

/// True when the session can yield pairs: at least 2 utterances per class.
bool session_pairable(const Session &session);

/// Draws n_pairs/4 child-child, n_pairs/4 adult-adult and n_pairs/2
/// child-adult pairs. Same-class endpoints are distinct utterances sampled
/// without replacement per pair. n_pairs must be a positive multiple of 4.
PairBatch sample_pairs(const Session &session, std::size_t n_pairs, Rng &rng);

/// Similarity of one raw pair under the current model (Eval-mode encoding).
double pair_score(const EncoderParams &params,
                  const SimilarityHeadParams &head, const Eigen::VectorXd &a,
                  const Eigen::VectorXd &b);

/// Mean binary cross-entropy of head scores on encoded pairs, with gradients
/// w.r.t. the head and both encoded endpoints. Computed from logits for
/// stability.
struct PairLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_a;
  Eigen::MatrixXd grad_b;
  Eigen::VectorXd grad_weight;
  Eigen::VectorXd grad_bias;  // length 1
};

PairLossResult pair_bce_loss(const Eigen::MatrixXd &encoded_a,
                             const Eigen::MatrixXd &encoded_b,
                             const Eigen::VectorXd &labels,
                             const SimilarityHeadParams &head);

/// One PairBatch per usable session per epoch; Adam updates the encoder and
/// head jointly; model selection on validation BCE over pair batches fixed
/// once per run.
std::tuple<EncoderParams, SimilarityHeadParams, TrainLog> train_siamese(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const SiameseTrainConfig &config);

/// Checkpoint = encoder tensors plus head.weight / head.bias.
void save_siamese_checkpoint(const EncoderParams &params,
                             const SimilarityHeadParams &head,
                             const std::string &path);
std::pair<EncoderParams, SimilarityHeadParams> load_siamese_checkpoint(
    const std::string &path);

}  // namespace protospk

#endif  // PROTOSPK_SIAMESE_HPP_
