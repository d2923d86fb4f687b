// src/evalharness.cc

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

#include "protospk/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "protospk/clustering.hpp"
#include "protospk/error.hpp"
#include "protospk/rng.hpp"
#include "protospk/textio.hpp"

namespace protospk {

namespace {

/// Runs fn(0..n-1) on up to `jobs` threads. Callers write results into
/// preallocated slots, so outputs are identical for any job count. The first
/// exception is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)> &fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t n_threads = std::min(jobs, n);
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (std::thread &t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Speaker> session_truth(const Session &session) {
  std::vector<Speaker> truth;
  truth.reserve(session.utterances.size());
  for (const Utterance &u : session.utterances) truth.push_back(u.speaker);
  return truth;
}

Eigen::MatrixXd gather_rows(const Session &session,
                            const std::vector<std::size_t> &indices) {
  const auto dim = static_cast<Eigen::Index>(
      session.utterances.front().embedding.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), dim);
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(
            session.utterances[indices[i]].embedding.data(), dim)
            .transpose();
  return out;
}

/// Per-repeat shot draw: child shots first, then adult, uniform without
/// replacement within each class.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> draw_shots(
    const Session &session, std::size_t shots_per_class, Rng &rng) {
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (Speaker speaker : {Speaker::kChild, Speaker::kAdult}) {
    const std::vector<std::size_t> pool = session.class_indices(speaker);
    const std::vector<std::size_t> pick =
        rng.sample_without_replacement(pool.size(), shots_per_class);
    std::vector<std::size_t> &dst =
        speaker == Speaker::kChild ? out.first : out.second;
    dst.reserve(shots_per_class);
    for (std::size_t p : pick) dst.push_back(pool[p]);
  }
  return out;
}

double mean_in_order(const std::vector<double> &values) {
  double sum = 0.0;
  for (double v : values) sum += v;  // fixed summation order
  return sum / static_cast<double>(values.size());
}

}  // namespace

double macro_f1(const std::vector<Speaker> &predictions,
                const std::vector<Speaker> &truth) {
  if (predictions.size() != truth.size())
    throw Error("macro_f1: predictions and truth disagree in length");
  if (truth.empty()) throw Error("macro_f1: empty input");
  double f1_sum = 0.0;
  for (Speaker cls : {Speaker::kChild, Speaker::kAdult}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool predicted = predictions[i] == cls;
      const bool actual = truth[i] == cls;
      if (predicted && actual) ++tp;
      else if (predicted && !actual) ++fp;
      else if (!predicted && actual) ++fn;
    }
    const double precision =
        tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall =
        tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 = precision + recall == 0.0
                          ? 0.0
                          : 2.0 * precision * recall / (precision + recall);
    f1_sum += f1;
  }
  return f1_sum / 2.0;
}

std::vector<const Session *> collect_sessions(
    const Corpus &corpus, const std::vector<std::string> &ids) {
  std::vector<const Session *> out;
  out.reserve(ids.size());
  for (const std::string &id : ids) {
    const Session *session = corpus.find_session(id);
    if (session == nullptr) throw Error("unknown session id: " + id);
    out.push_back(session);
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_train_val(
    const Corpus &corpus, std::size_t n_val, std::uint64_t seed) {
  if (n_val < 1) throw Error("split: n_val must be >= 1");
  if (n_val >= corpus.sessions.size())
    throw Error("split: n_val leaves no train sessions");
  std::vector<std::string> ids;
  ids.reserve(corpus.sessions.size());
  for (const Session &s : corpus.sessions) ids.push_back(s.session_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, seed_tag("split")));
  rng.shuffle(ids);
  std::vector<std::string> validation(ids.begin(),
                                      ids.begin() + static_cast<long>(n_val));
  std::vector<std::string> train(ids.begin() + static_cast<long>(n_val),
                                 ids.end());
  return {std::move(train), std::move(validation)};
}

EvalReport eval_fewshot(const FewshotModel &model,
                        const std::vector<const Session *> &test_sessions,
                        std::size_t shots_per_class, std::size_t repeats,
                        std::uint64_t base_seed, std::size_t jobs) {
  if (test_sessions.empty()) throw Error("eval_fewshot: no test sessions");
  if (shots_per_class < 1)
    throw Error("eval_fewshot: shots_per_class must be >= 1");
  if (repeats < 1) throw Error("eval_fewshot: repeats must be >= 1");
  const bool is_base = model.method == "base";
  const bool is_backprop = model.method == "base-backprop";
  const bool is_proto = model.method == "proto";
  if (!is_base && !is_backprop && !is_proto)
    throw Error("eval_fewshot: unknown method " + model.method);
  if (is_proto && model.proto_params == nullptr)
    throw Error("eval_fewshot: proto method needs encoder params");
  if ((is_base || is_backprop) && model.classifier == nullptr)
    throw Error("eval_fewshot: base methods need classifier params");

  EvalReport report;
  report.protocol = "fewshot";
  report.method = model.method;
  report.metric = "macro_f1";
  report.shots = is_base ? 0 : shots_per_class;
  report.repeats = is_base ? 1 : repeats;
  report.base_seed = base_seed;

  for (const Session *session : test_sessions) {
    if (!is_base) {
      for (Speaker speaker : {Speaker::kChild, Speaker::kAdult})
        if (session->count(speaker) <= shots_per_class)
          throw Error("eval_fewshot: session " + session->session_id +
                      " too small: needs more than " +
                      std::to_string(shots_per_class) + " " +
                      speaker_name(speaker) + " utterances");
    }

    double value = 0.0;
    if (is_base) {
      // Shot-independent: one pass over the full session.
      const std::vector<Speaker> predictions =
          predict(*model.classifier, session_matrix(*session));
      value = macro_f1(predictions, session_truth(*session));
    } else {
      std::vector<double> repeat_values(repeats, 0.0);
      parallel_for(repeats, jobs, [&](std::size_t r) {
        Rng rng(base_seed ^ static_cast<std::uint64_t>(r));
        const auto [child_shots, adult_shots] =
            draw_shots(*session, shots_per_class, rng);
        std::vector<Speaker> predictions;
        std::vector<std::size_t> scored;
        if (is_proto) {
          FewshotResult fs =
              fewshot_predict(*model.proto_params, *session, child_shots,
                              adult_shots, model.distance);
          predictions = std::move(fs.predictions);
          scored = std::move(fs.scored_indices);
        } else {
          ClassifierParams tuned = finetune(
              *model.classifier, *session, child_shots, adult_shots,
              model.finetune_steps, model.finetune_lr,
              base_seed ^ static_cast<std::uint64_t>(r));
          std::vector<bool> is_shot(session->utterances.size(), false);
          for (std::size_t idx : child_shots) is_shot[idx] = true;
          for (std::size_t idx : adult_shots) is_shot[idx] = true;
          for (std::size_t i = 0; i < session->utterances.size(); ++i)
            if (!is_shot[i]) scored.push_back(i);
          predictions = predict(tuned, gather_rows(*session, scored));
        }
        std::vector<Speaker> truth;
        truth.reserve(scored.size());
        for (std::size_t idx : scored)
          truth.push_back(session->utterances[idx].speaker);
        repeat_values[r] = macro_f1(predictions, truth);
      });
      value = mean_in_order(repeat_values);
    }
    report.per_session.emplace_back(session->session_id, value);
  }

  std::vector<double> session_values;
  session_values.reserve(report.per_session.size());
  for (const auto &[id, v] : report.per_session) session_values.push_back(v);
  report.corpus_mean = mean_in_order(session_values);
  return report;
}

EvalReport eval_cluster(const EmbeddingSource &source,
                        const std::vector<const Session *> &test_sessions,
                        const std::string &algo, std::uint64_t seed,
                        std::size_t jobs) {
  if (test_sessions.empty()) throw Error("eval_cluster: no test sessions");
  if (algo != "kmeans" && algo != "spectral")
    throw Error("eval_cluster: unknown algorithm " + algo);
  if (source.name != "raw" && source.encoder == nullptr)
    throw Error("eval_cluster: source " + source.name + " needs a model");

  EvalReport report;
  report.protocol = "cluster";
  report.method = source.name;
  report.metric = "purity";
  report.base_seed = seed;
  report.config_echo["algo"] = algo;
  report.per_session.resize(test_sessions.size());

  parallel_for(test_sessions.size(), jobs, [&](std::size_t i) {
    const Session &session = *test_sessions[i];
    Eigen::MatrixXd points = session_matrix(session);
    if (source.encoder != nullptr)
      points = forward_eval(*source.encoder, points);
    // Seed by session id, not position, so any session subset and any worker
    // count produce the same per-session value.
    const std::uint64_t session_seed = derive_seed(
        seed, fnv1a64(session.session_id.data(), session.session_id.size()));
    const ClusterAssignment assignment =
        algo == "kmeans" ? kmeans(points, 2, session_seed)
                         : spectral(points, 2, session_seed);
    report.per_session[i] = {session.session_id,
                             purity(assignment, session_truth(session))};
  });

  std::vector<double> session_values;
  session_values.reserve(report.per_session.size());
  for (const auto &[id, v] : report.per_session) session_values.push_back(v);
  report.corpus_mean = mean_in_order(session_values);
  return report;
}

namespace {

void write_fold_artifacts(const CrossvalConfig &config, std::size_t fold_index,
                          const TrainLog &log,
                          const std::function<void(const std::string &)> &saver) {
  if (config.out_dir.empty()) return;
  const std::filesystem::path fold_dir =
      std::filesystem::path(config.out_dir) /
      ("fold_" + std::to_string(fold_index));
  std::filesystem::create_directories(fold_dir);
  saver((fold_dir / "checkpoint.pnck").string());
  write_trainlog_csv(log, (fold_dir / "trainlog.csv").string());
}

}  // namespace

CrossvalResult crossval(const Corpus &corpus, const CrossvalConfig &config) {
  if (config.method != "proto" && config.method != "siamese" &&
      config.method != "base")
    throw Error("crossval: unknown method " + config.method);

  CrossvalResult result;
  result.plan = make_folds(corpus, config.n_folds, config.n_val, config.seed);
  result.plan_hash = hex_u64(result.plan.hash());
  result.folds.resize(result.plan.folds.size());

  EncoderConfig encoder = config.encoder;
  encoder.input_dim = corpus.dim;

  parallel_for(result.plan.folds.size(), config.jobs, [&](std::size_t f) {
    const Fold &fold = result.plan.folds[f];
    FoldOutcome outcome;
    outcome.fold = fold;
    const std::uint64_t fold_seed =
        derive_seed(config.seed, seed_tag("crossval.fold") ^
                                     static_cast<std::uint64_t>(f));
    const std::uint64_t fewshot_seed =
        derive_seed(fold_seed, seed_tag("eval.fewshot"));
    const std::uint64_t cluster_seed =
        derive_seed(fold_seed, seed_tag("eval.cluster"));

    const auto train_sessions = collect_sessions(corpus, fold.train_ids);
    const auto val_sessions = collect_sessions(corpus, fold.validation_ids);
    const auto test_sessions = collect_sessions(corpus, fold.test_ids);

    if (config.method == "proto") {
      ProtoTrainConfig tc;
      tc.k_supports = config.k_supports;
      tc.batch_size = config.batch_size;
      tc.max_epochs = config.max_epochs;
      tc.early_stop_patience = config.patience;
      tc.distance = config.distance;
      tc.seed = fold_seed;
      tc.lr = config.lr;
      tc.encoder = encoder;
      auto [params, log] = train(train_sessions, val_sessions, tc);
      outcome.train_log = std::move(log);

      FewshotModel model;
      model.method = "proto";
      model.proto_params = &params;
      model.distance = config.distance;
      outcome.reports.push_back(eval_fewshot(model, test_sessions,
                                             config.shots, config.repeats,
                                             fewshot_seed, 1));
      EmbeddingSource source{"proto", &params};
      outcome.reports.push_back(eval_cluster(source, test_sessions,
                                             config.cluster_algo, cluster_seed,
                                             1));
      write_fold_artifacts(config, f, outcome.train_log,
                           [&](const std::string &path) {
                             save_checkpoint(params, path);
                           });
    } else if (config.method == "base") {
      BaseTrainConfig tc;
      tc.batch_size = config.batch_size;
      tc.max_epochs = config.max_epochs;
      tc.early_stop_patience = config.patience;
      tc.lr = config.lr;
      tc.seed = fold_seed;
      tc.encoder = encoder;
      auto [params, log] = train_base(train_sessions, val_sessions, tc);
      outcome.train_log = std::move(log);

      FewshotModel base_model;
      base_model.method = "base";
      base_model.classifier = &params;
      outcome.reports.push_back(eval_fewshot(base_model, test_sessions,
                                             config.shots, config.repeats,
                                             fewshot_seed, 1));
      FewshotModel backprop_model = base_model;
      backprop_model.method = "base-backprop";
      backprop_model.finetune_steps = config.finetune_steps;
      backprop_model.finetune_lr = config.finetune_lr;
      outcome.reports.push_back(eval_fewshot(backprop_model, test_sessions,
                                             config.shots, config.repeats,
                                             fewshot_seed, 1));
      write_fold_artifacts(config, f, outcome.train_log,
                           [&](const std::string &path) {
                             save_classifier_checkpoint(params, path);
                           });
    } else {  // siamese
      SiameseTrainConfig tc;
      tc.batch_pairs = config.batch_size;
      tc.max_epochs = config.max_epochs;
      tc.early_stop_patience = config.patience;
      tc.lr = config.lr;
      tc.seed = fold_seed;
      tc.encoder = encoder;
      auto [params, head, log] = train_siamese(train_sessions, val_sessions, tc);
      outcome.train_log = std::move(log);

      EmbeddingSource source{"siamese", &params};
      outcome.reports.push_back(eval_cluster(source, test_sessions,
                                             config.cluster_algo, cluster_seed,
                                             1));
      write_fold_artifacts(config, f, outcome.train_log,
                           [&](const std::string &path) {
                             save_siamese_checkpoint(params, head, path);
                           });
    }
    result.folds[f] = std::move(outcome);
  });

  // Aggregate per (protocol, method): concatenate per-session values across
  // folds (each session is a test session exactly once).
  for (std::size_t r = 0; r < result.folds.front().reports.size(); ++r) {
    EvalReport aggregated = result.folds.front().reports[r];
    aggregated.fold_plan_hash = result.plan_hash;
    for (std::size_t f = 1; f < result.folds.size(); ++f) {
      const EvalReport &fold_report = result.folds[f].reports[r];
      aggregated.per_session.insert(aggregated.per_session.end(),
                                    fold_report.per_session.begin(),
                                    fold_report.per_session.end());
    }
    std::vector<double> values;
    values.reserve(aggregated.per_session.size());
    for (const auto &[id, v] : aggregated.per_session) values.push_back(v);
    aggregated.corpus_mean = mean_in_order(values);
    result.aggregated.push_back(std::move(aggregated));
  }
  return result;
}

namespace {

nlohmann::ordered_json report_to_json(const EvalReport &report) {
  nlohmann::ordered_json j;
  j["protocol"] = report.protocol;
  j["method"] = report.method;
  j["metric"] = report.metric;
  j["shots"] = report.shots;
  j["repeats"] = report.repeats;
  j["base_seed"] = report.base_seed;
  if (!report.fold_plan_hash.empty())
    j["fold_plan_hash"] = report.fold_plan_hash;
  if (!report.config_echo.empty()) j["config"] = report.config_echo;
  nlohmann::ordered_json per_session = nlohmann::ordered_json::object();
  for (const auto &[id, value] : report.per_session) per_session[id] = value;
  j["per_session"] = per_session;
  j["corpus_mean"] = report.corpus_mean;
  return j;
}

void write_json_file(const nlohmann::ordered_json &j, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(path + ": write failed");
}

}  // namespace

void write_report_csv(const std::vector<EvalReport> &reports,
                      const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << "protocol,method,metric,session_id,value\n";
  for (const EvalReport &report : reports) {
    for (const auto &[id, value] : report.per_session)
      out << report.protocol << ',' << report.method << ',' << report.metric
          << ',' << id << ',' << format_double(value) << '\n';
    out << report.protocol << ',' << report.method << ',' << report.metric
        << ",__corpus_mean__," << format_double(report.corpus_mean) << '\n';
  }
  if (!out) throw Error(path + ": write failed");
}

void write_crossval_summary(const CrossvalResult &result,
                            const CrossvalConfig &config,
                            const std::string &path) {
  nlohmann::ordered_json j;
  j["config"] = {
      {"method", config.method},
      {"n_folds", config.n_folds},
      {"n_val", config.n_val},
      {"k_supports", config.k_supports},
      {"distance", distance_name(config.distance)},
      {"cluster_algo", config.cluster_algo},
      {"shots", config.shots},
      {"repeats", config.repeats},
      {"finetune_steps", config.finetune_steps},
      {"finetune_lr", config.finetune_lr},
      {"batch_size", config.batch_size},
      {"max_epochs", config.max_epochs},
      {"patience", config.patience},
      {"lr", config.lr},
      {"seed", config.seed},
  };
  j["fold_plan_hash"] = result.plan_hash;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const FoldOutcome &outcome = result.folds[f];
    nlohmann::ordered_json fj;
    fj["index"] = f;
    fj["train"] = outcome.fold.train_ids;
    fj["validation"] = outcome.fold.validation_ids;
    fj["test"] = outcome.fold.test_ids;
    fj["best_epoch"] = outcome.train_log.best_epoch;
    fj["best_val_loss"] = outcome.train_log.best_val_loss;
    fj["epochs_run"] = outcome.train_log.entries.size();
    if (!outcome.train_log.warnings.empty())
      fj["warnings"] = outcome.train_log.warnings;
    nlohmann::ordered_json reports = nlohmann::ordered_json::array();
    for (const EvalReport &report : outcome.reports)
      reports.push_back(report_to_json(report));
    fj["reports"] = reports;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  nlohmann::ordered_json aggregated = nlohmann::ordered_json::array();
  for (const EvalReport &report : result.aggregated)
    aggregated.push_back(report_to_json(report));
  j["aggregated"] = aggregated;
  write_json_file(j, path);
}

void write_reports_json(const std::vector<EvalReport> &reports,
                        const std::string &path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const EvalReport &report : reports) j.push_back(report_to_json(report));
  write_json_file(j, path);
}

}  // namespace protospk
