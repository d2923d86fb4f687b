// include/protospk/baseline.hpp

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

#ifndef PROTOSPK_BASELINE_HPP_
#define PROTOSPK_BASELINE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "protospk/corpus.hpp"
#include "protospk/nnet.hpp"

namespace protospk {

// Conventional supervised classifier: the shared encoder plus a softmax
// layer, trained with cross-entropy on pooled utterances. Its fine-tuned
// variant adapts a copy on the labeled shots of one test session.

/// Column 0 of the softmax layer scores Child, column 1 Adult.
struct ClassifierParams {
  EncoderParams encoder;
  Eigen::MatrixXd w_out;  // M x 2
  Eigen::VectorXd b_out;  // 2
};

struct BaseTrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 20;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  EncoderConfig encoder;

  void validate() const;
};

/// Two-class cross-entropy over logit rows, mean-reduced, log-sum-exp
/// stabilized. Labels are column indices (0 Child, 1 Adult).
struct CrossEntropy {
  double loss = 0.0;
  Eigen::MatrixXd grad_logits;  // (softmax - onehot) / n
};

CrossEntropy softmax_cross_entropy(const Eigen::MatrixXd &logits,
                                   const std::vector<int> &labels);

/// Pooled-utterance cross-entropy training with per-epoch reshuffling;
/// model selection on validation cross-entropy.
std::pair<ClassifierParams, TrainLog> train_base(
    const std::vector<const Session *> &train_sessions,
    const std::vector<const Session *> &validation_sessions,
    const BaseTrainConfig &config);

/// Class posteriors (softmax over logits), rows summing to 1 within 1e-12.
Eigen::MatrixXd classifier_posteriors(const ClassifierParams &params,
                                      const Eigen::MatrixXd &batch);

/// Argmax class per row; exact logit ties go to Child.
std::vector<Speaker> predict(const ClassifierParams &params,
                             const Eigen::MatrixXd &batch);

/// Adapts a copy of `params` on the labeled shots of one session: n_steps
/// Adam steps of cross-entropy on the shots as a single batch, with
/// batch-norm running statistics frozen (Eval statistics) so 10-sample batch
/// statistics never enter. The input params are untouched.
ClassifierParams finetune(const ClassifierParams &params,
                          const Session &session,
                          const std::vector<std::size_t> &child_shots,
                          const std::vector<std::size_t> &adult_shots,
                          std::size_t n_steps, double lr, std::uint64_t seed);

void save_classifier_checkpoint(const ClassifierParams &params,
                                const std::string &path);
ClassifierParams load_classifier_checkpoint(const std::string &path);

}  // namespace protospk

#endif  // PROTOSPK_BASELINE_HPP_
