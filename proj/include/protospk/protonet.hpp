// include/protospk/protonet.hpp

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

#ifndef PROTOSPK_PROTONET_HPP_
#define PROTOSPK_PROTONET_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "protospk/corpus.hpp"
#include "protospk/nnet.hpp"
#include "protospk/rng.hpp"

namespace protospk {

// Prototypical-network training treats each session's child/adult pair as a
// two-way classification task. Every episode draws supports and queries from
// one session; the loss is the negative log posterior of the true class under
// a softmax over negative prototype distances.

enum class Distance {
  kSquaredEuclidean,  // default; the Bregman divergence matching mean prototypes
  kEuclidean,
};

std::string distance_name(Distance distance);
Distance distance_from_name(const std::string &name);

/// One episode: raw (not yet encoded) embeddings drawn from a single session.
/// The canonical batch layout stacks rows as
/// [child supports | adult supports | child queries | adult queries].
struct Episode {
  std::string session_id;
  Eigen::MatrixXd support_child;  // k x D
  Eigen::MatrixXd support_adult;  // k x D
  Eigen::MatrixXd query_child;    // q_child x D
  Eigen::MatrixXd query_adult;    // q_adult x D

  Eigen::MatrixXd stacked() const;
  std::size_t rows() const;
};

struct PrototypeSet {
  Eigen::VectorXd child;
  Eigen::VectorXd adult;
};

struct ProtoTrainConfig {
  std::size_t k_supports = 20;   // 20 for P20, 30 for P30
  std::size_t batch_size = 128;  // B; per-class query count is B - k, clamped
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 20;
  Distance distance = Distance::kSquaredEuclidean;
  std::uint64_t seed = 0;
  double lr = 3e-4;
  EncoderConfig encoder;

  void validate() const;
};

/// True when the session can yield an episode: at least k+1 utterances per
/// class (k supports plus one query).
bool session_usable(const Session &session, std::size_t k);

/// Draws k supports per class uniformly without replacement, then
/// min(B - k, remaining) queries per class from the remainder. Class order is
/// child first, supports before queries — the rng consumption order is part
/// of the determinism contract.
Episode sample_episode(const Session &session, std::size_t k,
                       std::size_t batch_size, Rng &rng);

/// Class prototypes = arithmetic means of the encoded support rows.
PrototypeSet compute_prototypes(const Eigen::MatrixXd &encoded_child,
                                const Eigen::MatrixXd &encoded_adult);

/// Softmax over negative distances, log-sum-exp stabilized.
/// Returns (p_child, p_adult), summing to 1 within 1e-12.
Eigen::Vector2d class_posteriors(const Eigen::VectorXd &query,
                                 const PrototypeSet &prototypes,
                                 Distance distance);

/// Episode loss and its gradients. Each query of class c carries weight
/// 1/(C * q_c) with C = 2, i.e. the per-class normalizer is the actual query
/// count (the nominal B - k when the session is abundant).
struct EpisodeLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_query_child;
  Eigen::MatrixXd grad_query_adult;
  Eigen::VectorXd grad_proto_child;
  Eigen::VectorXd grad_proto_adult;
};

EpisodeLossResult episode_loss(const Eigen::MatrixXd &encoded_query_child,
                               const Eigen::MatrixXd &encoded_query_adult,
                               const PrototypeSet &prototypes,
                               Distance distance);

/// Assembles the loss gradient w.r.t. the full encoded episode batch in
/// canonical layout; prototype gradients are distributed over the k support
/// rows of each class (d p_c / d support = 1/k).
Eigen::MatrixXd episode_grad_encoded(const EpisodeLossResult &result,
                                     std::size_t k);

/// Episodic training: per epoch, usable train sessions in seeded-shuffled
/// order, one episode and one Adam step per session. Validation episodes are
/// fixed once per run; model selection is minimal validation loss with early
/// stopping.
std::pair<EncoderParams, TrainLog> train(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const ProtoTrainConfig &config);

/// Few-shot inference: encode the labeled shots (Eval mode), build prototypes,
/// assign every remaining utterance to the nearest prototype. Exact distance
/// ties go to Child.
struct FewshotResult {
  std::vector<std::size_t> scored_indices;  // utterance indices within session
  std::vector<Speaker> predictions;         // aligned with scored_indices
};

FewshotResult fewshot_predict(const EncoderParams &params,
                              const Session &session,
                              const std::vector<std::size_t> &child_shots,
                              const std::vector<std::size_t> &adult_shots,
                              Distance distance);

}  // namespace protospk

#endif  // PROTOSPK_PROTONET_HPP_
