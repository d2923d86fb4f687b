// src/protonet.cc

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

#include "protospk/protonet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "protospk/error.hpp"

namespace protospk {

std::string distance_name(Distance distance) {
  return distance == Distance::kSquaredEuclidean ? "sqeuclidean" : "euclidean";
}

Distance distance_from_name(const std::string &name) {
  if (name == "sqeuclidean") return Distance::kSquaredEuclidean;
  if (name == "euclidean") return Distance::kEuclidean;
  throw Error("unknown distance '" + name +
              "' (expected sqeuclidean or euclidean)");
}

Eigen::MatrixXd Episode::stacked() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows()), support_child.cols());
  Eigen::Index r = 0;
  for (const Eigen::MatrixXd *part :
       {&support_child, &support_adult, &query_child, &query_adult}) {
    out.middleRows(r, part->rows()) = *part;
    r += part->rows();
  }
  return out;
}

std::size_t Episode::rows() const {
  return static_cast<std::size_t>(support_child.rows() + support_adult.rows() +
                                  query_child.rows() + query_adult.rows());
}

void ProtoTrainConfig::validate() const {
  if (k_supports < 1) throw Error("proto config: k_supports must be >= 1");
  if (batch_size <= k_supports)
    throw Error("proto config: batch_size must exceed k_supports");
  if (max_epochs < 1) throw Error("proto config: max_epochs must be >= 1");
  if (early_stop_patience >= max_epochs)
    throw Error("proto config: early_stop_patience must be < max_epochs");
  if (!(lr >= 0.0)) throw Error("proto config: lr must be >= 0");
  encoder.validate();
}

bool session_usable(const Session &session, std::size_t k) {
  return session.count(Speaker::kChild) >= k + 1 &&
         session.count(Speaker::kAdult) >= k + 1;
}

namespace {

Eigen::MatrixXd gather_rows(const Session &session,
                            const std::vector<std::size_t> &indices) {
  if (indices.empty())
    throw Error("episode sampling produced an empty row set");
  const auto dim = static_cast<Eigen::Index>(
      session.utterances.front().embedding.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::vector<double> &e = session.utterances[indices[i]].embedding;
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(e.data(), dim).transpose();
  }
  return out;
}

double pair_distance(const Eigen::VectorXd &a, const Eigen::VectorXd &b,
                     Distance distance) {
  const double sq = (a - b).squaredNorm();
  return distance == Distance::kSquaredEuclidean ? sq : std::sqrt(sq);
}

}  // namespace

Episode sample_episode(const Session &session, std::size_t k,
                       std::size_t batch_size, Rng &rng) {
  if (k < 1) throw Error("sample_episode: k must be >= 1");
  if (batch_size <= k)
    throw Error("sample_episode: batch_size must exceed k");
  Episode episode;
  episode.session_id = session.session_id;
  for (Speaker speaker : {Speaker::kChild, Speaker::kAdult}) {
    const std::vector<std::size_t> pool = session.class_indices(speaker);
    if (pool.size() < k + 1)
      throw Error("session " + session.session_id + " has too few " +
                  speaker_name(speaker) + " utterances for an episode (" +
                  std::to_string(pool.size()) + " <= k)");
    // Supports first, then queries from the remainder; draw order is pinned.
    const std::vector<std::size_t> support_local =
        rng.sample_without_replacement(pool.size(), k);
    std::vector<bool> taken(pool.size(), false);
    for (std::size_t s : support_local) taken[s] = true;
    std::vector<std::size_t> remainder;
    remainder.reserve(pool.size() - k);
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (!taken[i]) remainder.push_back(pool[i]);
    const std::size_t q = std::min(batch_size - k, remainder.size());
    const std::vector<std::size_t> query_local =
        rng.sample_without_replacement(remainder.size(), q);

    std::vector<std::size_t> support_rows, query_rows;
    support_rows.reserve(k);
    for (std::size_t s : support_local) support_rows.push_back(pool[s]);
    query_rows.reserve(q);
    for (std::size_t s : query_local) query_rows.push_back(remainder[s]);

    Eigen::MatrixXd supports = gather_rows(session, support_rows);
    Eigen::MatrixXd queries = gather_rows(session, query_rows);
    if (speaker == Speaker::kChild) {
      episode.support_child = std::move(supports);
      episode.query_child = std::move(queries);
    } else {
      episode.support_adult = std::move(supports);
      episode.query_adult = std::move(queries);
    }
  }
  return episode;
}

PrototypeSet compute_prototypes(const Eigen::MatrixXd &encoded_child,
                                const Eigen::MatrixXd &encoded_adult) {
  if (encoded_child.rows() < 1 || encoded_adult.rows() < 1)
    throw Error("compute_prototypes: each class needs at least one support");
  if (encoded_child.cols() != encoded_adult.cols())
    throw Error("compute_prototypes: class dimensions disagree");
  PrototypeSet protos;
  protos.child = encoded_child.colwise().mean().transpose();
  protos.adult = encoded_adult.colwise().mean().transpose();
  return protos;
}

Eigen::Vector2d class_posteriors(const Eigen::VectorXd &query,
                                 const PrototypeSet &prototypes,
                                 Distance distance) {
  const double d_child = pair_distance(query, prototypes.child, distance);
  const double d_adult = pair_distance(query, prototypes.adult, distance);
  const double m = std::max(-d_child, -d_adult);
  const double e_child = std::exp(-d_child - m);
  const double e_adult = std::exp(-d_adult - m);
  const double z = e_child + e_adult;
  return {e_child / z, e_adult / z};
}

EpisodeLossResult episode_loss(const Eigen::MatrixXd &encoded_query_child,
                               const Eigen::MatrixXd &encoded_query_adult,
                               const PrototypeSet &prototypes,
                               Distance distance) {
  if (encoded_query_child.rows() < 1 || encoded_query_adult.rows() < 1)
    throw Error("episode_loss: at least one query per class is required");

  EpisodeLossResult result;
  result.grad_query_child =
      Eigen::MatrixXd::Zero(encoded_query_child.rows(), encoded_query_child.cols());
  result.grad_query_adult =
      Eigen::MatrixXd::Zero(encoded_query_adult.rows(), encoded_query_adult.cols());
  result.grad_proto_child = Eigen::VectorXd::Zero(prototypes.child.size());
  result.grad_proto_adult = Eigen::VectorXd::Zero(prototypes.adult.size());

  // d distance / d query for one (query, prototype) pair; the prototype end
  // is the negative of this.
  auto distance_grad = [&](const Eigen::VectorXd &x, const Eigen::VectorXd &p) {
    Eigen::VectorXd r = x - p;
    if (distance == Distance::kSquaredEuclidean) return Eigen::VectorXd(2.0 * r);
    const double norm = r.norm();
    if (norm == 0.0) return Eigen::VectorXd(Eigen::VectorXd::Zero(r.size()));
    return Eigen::VectorXd(r / norm);
  };

  for (int cls = 0; cls < 2; ++cls) {
    const bool is_child = cls == 0;
    const Eigen::MatrixXd &queries =
        is_child ? encoded_query_child : encoded_query_adult;
    Eigen::MatrixXd &grad_queries =
        is_child ? result.grad_query_child : result.grad_query_adult;
    // Algorithm normalization 1/(C * (B - k)), with B - k replaced by the
    // actual per-class query count when the session ran short.
    const double weight = 1.0 / (2.0 * static_cast<double>(queries.rows()));
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      const Eigen::VectorXd x = queries.row(i).transpose();
      const double d_child = pair_distance(x, prototypes.child, distance);
      const double d_adult = pair_distance(x, prototypes.adult, distance);
      const double m = std::max(-d_child, -d_adult);
      const double e_child = std::exp(-d_child - m);
      const double e_adult = std::exp(-d_adult - m);
      const double z = e_child + e_adult;
      const double p_child = e_child / z;
      const double p_adult = e_adult / z;
      const double d_true = is_child ? d_child : d_adult;
      result.loss += weight * (d_true + m + std::log(z));

      // d loss / d d_c = [c == true] - p_c, scaled by the query weight.
      const double coef_child = ((is_child ? 1.0 : 0.0) - p_child) * weight;
      const double coef_adult = ((is_child ? 0.0 : 1.0) - p_adult) * weight;
      const Eigen::VectorXd gx_child = distance_grad(x, prototypes.child);
      const Eigen::VectorXd gx_adult = distance_grad(x, prototypes.adult);
      grad_queries.row(i) +=
          (coef_child * gx_child + coef_adult * gx_adult).transpose();
      result.grad_proto_child -= coef_child * gx_child;
      result.grad_proto_adult -= coef_adult * gx_adult;
    }
  }
  return result;
}

Eigen::MatrixXd episode_grad_encoded(const EpisodeLossResult &result,
                                     std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::Index qc = result.grad_query_child.rows();
  const Eigen::Index qa = result.grad_query_adult.rows();
  const Eigen::Index m = result.grad_query_child.cols();
  Eigen::MatrixXd grad(2 * kk + qc + qa, m);
  // Mean prototypes spread their gradient uniformly over the support rows.
  grad.topRows(kk).rowwise() =
      (result.grad_proto_child / static_cast<double>(k)).transpose();
  grad.middleRows(kk, kk).rowwise() =
      (result.grad_proto_adult / static_cast<double>(k)).transpose();
  grad.middleRows(2 * kk, qc) = result.grad_query_child;
  grad.bottomRows(qa) = result.grad_query_adult;
  return grad;
}

std::pair<EncoderParams, TrainLog> train(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const ProtoTrainConfig &config) {
  config.validate();
  TrainLog log;

  std::vector<const Session *> usable_train;
  for (const Session *s : train_sessions) {
    if (session_usable(*s, config.k_supports)) {
      usable_train.push_back(s);
    } else {
      log.warnings.push_back("session " + s->session_id +
                             " skipped every epoch: needs at least " +
                             std::to_string(config.k_supports + 1) +
                             " utterances per class");
    }
  }
  if (usable_train.empty()) throw Error("train: no usable train sessions");

  std::vector<const Session *> usable_val;
  for (const Session *s : validation_sessions) {
    if (session_usable(*s, config.k_supports)) {
      usable_val.push_back(s);
    } else {
      log.warnings.push_back("validation session " + s->session_id +
                             " skipped: needs at least " +
                             std::to_string(config.k_supports + 1) +
                             " utterances per class");
    }
  }
  if (usable_val.empty()) throw Error("train: no usable validation sessions");

  EncoderParams params = init_params(
      config.encoder, derive_seed(config.seed, seed_tag("proto.init")));
  AdamState adam = AdamState::create(trainable_tensors(params), config.lr);
  Rng run_rng(derive_seed(config.seed, seed_tag("proto.episodes")));

  // Validation episodes are fixed once so the validation loss is comparable
  // across epochs.
  Rng val_rng(derive_seed(config.seed, seed_tag("proto.val.episodes")));
  std::vector<Episode> val_episodes;
  val_episodes.reserve(usable_val.size());
  for (const Session *s : usable_val)
    val_episodes.push_back(
        sample_episode(*s, config.k_supports, config.batch_size, val_rng));

  const auto kk = static_cast<Eigen::Index>(config.k_supports);
  auto episode_pass = [&](const Episode &episode, const Eigen::MatrixXd &encoded)
      -> EpisodeLossResult {
    PrototypeSet protos = compute_prototypes(
        encoded.topRows(kk), encoded.middleRows(kk, kk));
    return episode_loss(encoded.middleRows(2 * kk, episode.query_child.rows()),
                        encoded.bottomRows(episode.query_adult.rows()), protos,
                        config.distance);
  };

  EncoderParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(usable_train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    run_rng.shuffle(order);
    double train_loss_sum = 0.0;
    for (std::size_t idx : order) {
      Episode episode = sample_episode(*usable_train[idx], config.k_supports,
                                       config.batch_size, run_rng);
      ForwardTrace trace;
      Eigen::MatrixXd encoded =
          forward(params, episode.stacked(), Mode::kTrain, &run_rng, &trace);
      EpisodeLossResult loss = episode_pass(episode, encoded);
      train_loss_sum += loss.loss;
      Eigen::MatrixXd grad_encoded =
          episode_grad_encoded(loss, config.k_supports);
      EncoderGrads grads = backward(trace, params, grad_encoded);
      adam_step(trainable_tensors(params), trainable_tensors(grads), adam);
    }
    const double train_loss =
        train_loss_sum / static_cast<double>(order.size());

    double val_loss_sum = 0.0;
    for (const Episode &episode : val_episodes) {
      Eigen::MatrixXd encoded = forward_eval(params, episode.stacked());
      val_loss_sum += episode_pass(episode, encoded).loss;
    }
    const double val_loss =
        val_loss_sum / static_cast<double>(val_episodes.size());

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

FewshotResult fewshot_predict(const EncoderParams &params,
                              const Session &session,
                              const std::vector<std::size_t> &child_shots,
                              const std::vector<std::size_t> &adult_shots,
                              Distance distance) {
  if (child_shots.empty() || adult_shots.empty())
    throw Error("fewshot_predict: both classes need at least one shot");
  std::set<std::size_t> shot_set;
  auto check_shots = [&](const std::vector<std::size_t> &shots,
                         Speaker speaker) {
    for (std::size_t idx : shots) {
      if (idx >= session.utterances.size())
        throw Error("fewshot_predict: shot index out of range");
      if (session.utterances[idx].speaker != speaker)
        throw Error("fewshot_predict: shot index labeled with wrong class");
      if (!shot_set.insert(idx).second)
        throw Error("fewshot_predict: duplicate shot index");
    }
  };
  check_shots(child_shots, Speaker::kChild);
  check_shots(adult_shots, Speaker::kAdult);

  Eigen::MatrixXd child_encoded =
      forward_eval(params, gather_rows(session, child_shots));
  Eigen::MatrixXd adult_encoded =
      forward_eval(params, gather_rows(session, adult_shots));
  PrototypeSet protos = compute_prototypes(child_encoded, adult_encoded);

  FewshotResult result;
  for (std::size_t i = 0; i < session.utterances.size(); ++i)
    if (shot_set.find(i) == shot_set.end()) result.scored_indices.push_back(i);
  if (result.scored_indices.empty())
    throw Error("fewshot_predict: no utterances left to score");

  Eigen::MatrixXd scored =
      forward_eval(params, gather_rows(session, result.scored_indices));
  result.predictions.reserve(result.scored_indices.size());
  for (Eigen::Index i = 0; i < scored.rows(); ++i) {
    const Eigen::VectorXd x = scored.row(i).transpose();
    const double d_child = pair_distance(x, protos.child, distance);
    const double d_adult = pair_distance(x, protos.adult, distance);
    // Exact ties go to Child by contract.
    result.predictions.push_back(d_child <= d_adult ? Speaker::kChild
                                                    : Speaker::kAdult);
  }
  return result;
}

}  // namespace protospk
