// include/protospk/evalharness.hpp

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

#ifndef PROTOSPK_EVALHARNESS_HPP_
#define PROTOSPK_EVALHARNESS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "protospk/baseline.hpp"
#include "protospk/corpus.hpp"
#include "protospk/nnet.hpp"
#include "protospk/protonet.hpp"
#include "protospk/siamese.hpp"

namespace protospk {

// Orchestrates the two evaluation protocols (few-shot classification and
// unsupervised clustering) over cross-validation folds, and serializes the
// results. Every number in a report is reproducible from (corpus file,
// config, master seed); parallel execution never changes output bytes.

struct EvalReport {
  std::string protocol;  // "fewshot" | "cluster"
  std::string method;    // "proto" | "base" | "base-backprop" | "siamese" | "raw"
  std::string metric;    // "macro_f1" | "purity"
  std::size_t shots = 0;
  std::size_t repeats = 0;
  std::uint64_t base_seed = 0;
  std::string fold_plan_hash;  // empty outside cross-validation
  std::map<std::string, std::string> config_echo;
  std::vector<std::pair<std::string, double>> per_session;  // (id, value)
  double corpus_mean = 0.0;  // arithmetic mean of per-session values
};

/// Unweighted mean of per-class F1. A class with zero predicted and zero
/// correct instances scores 0.
double macro_f1(const std::vector<Speaker> &predictions,
                const std::vector<Speaker> &truth);

/// Resolves session ids against a corpus (error on unknown id).
std::vector<const Session *> collect_sessions(
    const Corpus &corpus, const std::vector<std::string> &ids);

/// Sorted session ids, seeded-shuffled; the first n_val become the
/// validation split, the rest the train split.
std::pair<std::vector<std::string>, std::vector<std::string>> split_train_val(
    const Corpus &corpus, std::size_t n_val, std::uint64_t seed);

/// Model handle for the few-shot protocol.
struct FewshotModel {
  std::string method;  // "proto" | "base" | "base-backprop"
  const EncoderParams *proto_params = nullptr;   // proto
  Distance distance = Distance::kSquaredEuclidean;
  const ClassifierParams *classifier = nullptr;  // base / base-backprop
  std::size_t finetune_steps = 20;
  double finetune_lr = 3e-4;
};

/// Per repeat r, shots are drawn with an rng seeded base_seed XOR r (child
/// shots first); the per-session value is the mean macro-F1 over repeats.
/// "base" ignores shots and is evaluated once on the full session. Repeats
/// may run on `jobs` threads without changing any output value.
EvalReport eval_fewshot(const FewshotModel &model,
                        const std::vector<const Session *> &test_sessions,
                        std::size_t shots_per_class, std::size_t repeats,
                        std::uint64_t base_seed, std::size_t jobs = 1);

/// Embedding source for the clustering protocol ("raw" uses the input
/// embeddings unchanged; otherwise utterances pass through the encoder in
/// Eval mode).
struct EmbeddingSource {
  std::string name;  // "raw" | "proto" | "siamese"
  const EncoderParams *encoder = nullptr;
};

/// Per session: embed, cluster with k = 2, score purity. The per-session
/// clustering seed is derived from the session id so results are independent
/// of session order and worker count.
EvalReport eval_cluster(const EmbeddingSource &source,
                        const std::vector<const Session *> &test_sessions,
                        const std::string &algo,  // "kmeans" | "spectral"
                        std::uint64_t seed, std::size_t jobs = 1);

struct CrossvalConfig {
  std::string method = "proto";  // "proto" | "siamese" | "base"
  std::size_t n_folds = 9;
  std::size_t n_val = 6;
  std::size_t k_supports = 20;
  Distance distance = Distance::kSquaredEuclidean;
  std::string cluster_algo = "kmeans";
  std::size_t shots = 5;
  std::size_t repeats = 200;
  std::size_t finetune_steps = 20;
  double finetune_lr = 3e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double lr = 3e-4;
  EncoderConfig encoder;  // input_dim is overridden by the corpus dim
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out_dir;  // when nonempty: checkpoints and train logs per fold
};

struct FoldOutcome {
  Fold fold;
  TrainLog train_log;
  std::vector<EvalReport> reports;
};

struct CrossvalResult {
  FoldPlan plan;
  std::string plan_hash;
  std::vector<FoldOutcome> folds;
  /// One report per (protocol, method): per-session values across all folds
  /// (every session appears exactly once as a test session).
  std::vector<EvalReport> aggregated;
};

/// Per fold: train on the train split, select on validation, evaluate the
/// protocols applicable to the method on the test split. proto runs both
/// protocols; base runs few-shot as "base" and "base-backprop"; siamese runs
/// clustering. Folds may run on `jobs` threads.
CrossvalResult crossval(const Corpus &corpus, const CrossvalConfig &config);

/// CSV rows: protocol,method,metric,session_id,value — aggregated reports
/// only, in report order.
void write_report_csv(const std::vector<EvalReport> &reports,
                      const std::string &path);

/// Full JSON summary: config echo, fold plan, per-fold and aggregated
/// reports. Byte-identical across reruns and job counts.
void write_crossval_summary(const CrossvalResult &result,
                            const CrossvalConfig &config,
                            const std::string &path);

/// JSON for standalone eval runs (report list plus config echo).
void write_reports_json(const std::vector<EvalReport> &reports,
                        const std::string &path);

}  // namespace protospk

#endif  // PROTOSPK_EVALHARNESS_HPP_
