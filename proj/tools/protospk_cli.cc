// tools/protospk_cli.cc

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

// protospk: single entry point for corpus generation, model training,
// evaluation, cross-validation, and 2-d projection plots.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error.
// Every artifact-producing run writes a manifest JSON (tool version, full
// effective configuration, master seed, input file digest) next to or inside
// its --out target, so any artifact is reproducible from its manifest.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "protospk/baseline.hpp"
#include "protospk/clustering.hpp"
#include "protospk/corpus.hpp"
#include "protospk/error.hpp"
#include "protospk/evalharness.hpp"
#include "protospk/nnet.hpp"
#include "protospk/protonet.hpp"
#include "protospk/rng.hpp"
#include "protospk/siamese.hpp"
#include "protospk/syngen.hpp"
#include "protospk/textio.hpp"
#include "protospk/viz.hpp"

namespace {

using nlohmann::ordered_json;

constexpr const char kToolVersion[] = "protospk 1.0.0";

// ---------------------------------------------------------------------------
// --config expansion: a JSON object file may supply any flag by name; flags
// given on the command line override the file. Implemented by appending
// "--key value" pairs for every config key that does not already appear in
// argv (arrays expand to repeated flags).

bool has_flag(const std::vector<std::string> &args, const std::string &key) {
  const std::string plain = "--" + key;
  const std::string assign = plain + "=";
  for (const std::string &a : args)
    if (a == plain || a.rfind(assign, 0) == 0) return true;
  return false;
}

std::string json_scalar_to_arg(const ordered_json &v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();  // numbers keep shortest round-trip form; bools→true/false
}

std::vector<std::string> expand_config_args(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      config_path = args[i].substr(std::string("--config=").size());
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw protospk::Error(config_path + ": cannot open config file");
  ordered_json config;
  try {
    config = ordered_json::parse(in);
  } catch (const std::exception &e) {
    throw protospk::Error(config_path + ": invalid JSON: " + e.what());
  }
  if (!config.is_object())
    throw protospk::Error(config_path + ": config must be a JSON object");

  for (const auto &[key, value] : config.items()) {
    if (key == "config" || has_flag(args, key)) continue;
    if (value.is_array()) {
      for (const auto &element : value) {
        args.push_back("--" + key);
        args.push_back(json_scalar_to_arg(element));
      }
    } else {
      args.push_back("--" + key);
      args.push_back(json_scalar_to_arg(value));
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// Manifest

ordered_json manifest_base(const std::string &command, std::uint64_t seed,
                           const std::string &input_path) {
  ordered_json m;
  m["tool"] = kToolVersion;
  m["command"] = command;
  m["seed"] = seed;
  if (input_path.empty()) {
    m["input"] = "none";
  } else {
    m["input"] = {{"path", input_path},
                  {"fnv1a64", protospk::fnv1a64_file_hex(input_path)}};
  }
  return m;
}

void write_manifest(const ordered_json &manifest,
                    const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw protospk::Error(path.string() + ": cannot open for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw protospk::Error(path.string() + ": write failed");
}

// Directory-shaped outputs carry <out>/manifest.json; file-shaped outputs a
// sibling <out>.manifest.json.
std::filesystem::path dir_manifest(const std::string &out_dir) {
  return std::filesystem::path(out_dir) / "manifest.json";
}

std::filesystem::path file_manifest(const std::string &out_file) {
  return std::filesystem::path(out_file + ".manifest.json");
}

void print_warnings(const std::vector<std::string> &warnings) {
  for (const std::string &w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<std::string> all_session_ids(const protospk::Corpus &corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.sessions.size());
  for (const protospk::Session &s : corpus.sessions) ids.push_back(s.session_id);
  return ids;
}

// Loads the encoder behind an --embeddings choice ("raw" needs no model).
protospk::EncoderParams load_embedding_encoder(const std::string &embeddings,
                                               const std::string &model_path) {
  if (model_path.empty())
    throw protospk::Error("--embeddings " + embeddings +
                          " requires --model <checkpoint>");
  if (embeddings == "proto") return protospk::load_checkpoint(model_path);
  if (embeddings == "siamese")
    return protospk::load_siamese_checkpoint(model_path).first;
  throw protospk::Error("unknown embedding source: " + embeddings);
}

}  // namespace

int main(int argc, char **argv) {
  std::vector<std::string> args;
  try {
    args = expand_config_args(argc, argv);
  } catch (const protospk::Error &e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  CLI::App app{"protospk: metric-learning toolkit for child-adult speaker "
               "classification over fixed-length embeddings"};
  app.name("protospk");
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // Shared flag storage. Each subcommand registers only the flags it uses.
  std::string corpus_path, out_path, method, model_path, config_file;
  std::string preset, distance_str = "sqeuclidean", algo, embeddings = "raw";
  std::vector<std::string> session_ids;
  std::uint64_t seed = 7;
  std::size_t k_supports = 20, batch_size = 128, max_epochs = 200, patience = 20;
  std::size_t shots = 5, repeats = 200, finetune_steps = 20;
  std::size_t n_folds = 9, n_val = 6, jobs = 1, tsne_iters = 1000;
  double lr = 3e-4, finetune_lr = 3e-4, perplexity = 30.0;

  auto add_config_flag = [&config_file](CLI::App *cmd) {
    cmd->add_option("--config", config_file,
                    "JSON object file supplying any flag by name "
                    "(command-line flags override it)");
  };

  // ---- gen -----------------------------------------------------------------
  protospk::GenConfig gen_config;
  CLI::App *gen = app.add_subcommand(
      "gen", "Generate a synthetic labeled embedding corpus (EMB-CSV v1)");
  gen->add_option("--preset", preset, "Start from a named preset")
      ->check(CLI::IsMember({"g1", "g2"}));
  gen->add_option("--dim", gen_config.dim, "Embedding dimension");
  gen->add_option("--n_sessions", gen_config.n_sessions, "Number of sessions");
  gen->add_option("--utts_per_session_child_mean",
                  gen_config.utts_per_session_child_mean,
                  "Mean child utterances per session");
  gen->add_option("--utts_per_session_child_spread",
                  gen_config.utts_per_session_child_spread,
                  "Half-width of the uniform child count range");
  gen->add_option("--utts_per_session_adult_mean",
                  gen_config.utts_per_session_adult_mean,
                  "Mean adult utterances per session");
  gen->add_option("--utts_per_session_adult_spread",
                  gen_config.utts_per_session_adult_spread,
                  "Half-width of the uniform adult count range");
  gen->add_option("--class_separation", gen_config.class_separation,
                  "Distance between global class means");
  gen->add_option("--session_shift_scale", gen_config.session_shift_scale,
                  "Per-session channel offset standard deviation");
  gen->add_option("--speaker_scale_child", gen_config.speaker_scale_child,
                  "Per-session child speaker offset standard deviation");
  gen->add_option("--speaker_scale_adult", gen_config.speaker_scale_adult,
                  "Per-session adult speaker offset standard deviation");
  gen->add_option("--utt_noise_scale", gen_config.utt_noise_scale,
                  "Per-utterance noise standard deviation");
  gen->add_option("--seed", gen_config.seed, "Master seed");
  gen->add_option("--out", out_path, "Output corpus path (.csv)")->required();
  add_config_flag(gen);

  gen->callback([&]() {
    protospk::GenConfig config =
        preset == "g1"   ? protospk::GenConfig::g1()
        : preset == "g2" ? protospk::GenConfig::g2()
                         : protospk::GenConfig{};
    // Explicit flags override the preset.
    if (gen->count("--dim")) config.dim = gen_config.dim;
    if (gen->count("--n_sessions")) config.n_sessions = gen_config.n_sessions;
    if (gen->count("--utts_per_session_child_mean"))
      config.utts_per_session_child_mean = gen_config.utts_per_session_child_mean;
    if (gen->count("--utts_per_session_child_spread"))
      config.utts_per_session_child_spread =
          gen_config.utts_per_session_child_spread;
    if (gen->count("--utts_per_session_adult_mean"))
      config.utts_per_session_adult_mean = gen_config.utts_per_session_adult_mean;
    if (gen->count("--utts_per_session_adult_spread"))
      config.utts_per_session_adult_spread =
          gen_config.utts_per_session_adult_spread;
    if (gen->count("--class_separation"))
      config.class_separation = gen_config.class_separation;
    if (gen->count("--session_shift_scale"))
      config.session_shift_scale = gen_config.session_shift_scale;
    if (gen->count("--speaker_scale_child"))
      config.speaker_scale_child = gen_config.speaker_scale_child;
    if (gen->count("--speaker_scale_adult"))
      config.speaker_scale_adult = gen_config.speaker_scale_adult;
    if (gen->count("--utt_noise_scale"))
      config.utt_noise_scale = gen_config.utt_noise_scale;
    if (gen->count("--seed")) config.seed = gen_config.seed;
    config.validate();

    const protospk::Corpus corpus = protospk::generate(config);
    protospk::save_corpus(corpus, out_path);

    ordered_json manifest = manifest_base("gen", config.seed, "");
    manifest["config"] = {
        {"preset", preset.empty() ? "none" : preset},
        {"dim", config.dim},
        {"n_sessions", config.n_sessions},
        {"utts_per_session_child_mean", config.utts_per_session_child_mean},
        {"utts_per_session_child_spread", config.utts_per_session_child_spread},
        {"utts_per_session_adult_mean", config.utts_per_session_adult_mean},
        {"utts_per_session_adult_spread", config.utts_per_session_adult_spread},
        {"class_separation", config.class_separation},
        {"session_shift_scale", config.session_shift_scale},
        {"speaker_scale_child", config.speaker_scale_child},
        {"speaker_scale_adult", config.speaker_scale_adult},
        {"utt_noise_scale", config.utt_noise_scale},
        {"seed", config.seed},
        {"out", out_path},
    };
    write_manifest(manifest, file_manifest(out_path));
    std::cout << "wrote " << corpus.sessions.size() << " sessions, "
              << corpus.total_utterances() << " utterances to " << out_path
              << '\n';
  });

  // ---- train ---------------------------------------------------------------
  CLI::App *train_cmd = app.add_subcommand(
      "train", "Train an encoder (proto episodic, siamese pairs, or softmax "
               "baseline) and write a checkpoint plus train log");
  train_cmd->add_option("--corpus", corpus_path, "EMB-CSV v1 corpus")->required();
  train_cmd->add_option("--method", method, "proto | siamese | base")
      ->required()
      ->check(CLI::IsMember({"proto", "siamese", "base"}));
  train_cmd->add_option("--k", k_supports, "Supports per class per episode "
                        "(proto only)");
  train_cmd->add_option("--distance", distance_str,
                        "sqeuclidean | euclidean (proto only)")
      ->check(CLI::IsMember({"sqeuclidean", "euclidean"}));
  train_cmd->add_option("--batch_size", batch_size,
                        "Episode/pair/pooled batch size");
  train_cmd->add_option("--max_epochs", max_epochs, "Maximum training epochs");
  train_cmd->add_option("--patience", patience, "Early-stopping patience");
  train_cmd->add_option("--lr", lr, "Adam learning rate");
  train_cmd->add_option("--val", n_val,
                        "Sessions held out for validation/model selection");
  train_cmd->add_option("--seed", seed, "Master seed");
  train_cmd->add_option("--out", out_path, "Output run directory")->required();
  add_config_flag(train_cmd);

  train_cmd->callback([&]() {
    const protospk::Corpus corpus = protospk::load_corpus(corpus_path);
    const auto [train_ids, val_ids] =
        protospk::split_train_val(corpus, n_val, seed);
    const auto train_sessions = protospk::collect_sessions(corpus, train_ids);
    const auto val_sessions = protospk::collect_sessions(corpus, val_ids);

    protospk::EncoderConfig encoder;
    encoder.input_dim = corpus.dim;
    std::filesystem::create_directories(out_path);
    const std::filesystem::path out_dir(out_path);

    protospk::TrainLog log;
    if (method == "proto") {
      protospk::ProtoTrainConfig tc;
      tc.k_supports = k_supports;
      tc.batch_size = batch_size;
      tc.max_epochs = max_epochs;
      tc.early_stop_patience = patience;
      tc.distance = protospk::distance_from_name(distance_str);
      tc.seed = seed;
      tc.lr = lr;
      tc.encoder = encoder;
      auto [params, train_log] = protospk::train(train_sessions, val_sessions, tc);
      log = std::move(train_log);
      protospk::save_checkpoint(params, (out_dir / "checkpoint.pnck").string());
    } else if (method == "base") {
      protospk::BaseTrainConfig tc;
      tc.batch_size = batch_size;
      tc.max_epochs = max_epochs;
      tc.early_stop_patience = patience;
      tc.lr = lr;
      tc.seed = seed;
      tc.encoder = encoder;
      auto [params, train_log] =
          protospk::train_base(train_sessions, val_sessions, tc);
      log = std::move(train_log);
      protospk::save_classifier_checkpoint(
          params, (out_dir / "checkpoint.pnck").string());
    } else {
      protospk::SiameseTrainConfig tc;
      tc.batch_pairs = batch_size;
      tc.max_epochs = max_epochs;
      tc.early_stop_patience = patience;
      tc.lr = lr;
      tc.seed = seed;
      tc.encoder = encoder;
      auto [params, head, train_log] =
          protospk::train_siamese(train_sessions, val_sessions, tc);
      log = std::move(train_log);
      protospk::save_siamese_checkpoint(params, head,
                                        (out_dir / "checkpoint.pnck").string());
    }
    protospk::write_trainlog_csv(log, (out_dir / "trainlog.csv").string());
    print_warnings(log.warnings);

    ordered_json manifest = manifest_base("train", seed, corpus_path);
    manifest["config"] = {
        {"method", method},        {"k", k_supports},
        {"distance", distance_str}, {"batch_size", batch_size},
        {"max_epochs", max_epochs}, {"patience", patience},
        {"lr", lr},                 {"val", n_val},
        {"seed", seed},             {"out", out_path},
    };
    write_manifest(manifest, dir_manifest(out_path));
    std::cout << "trained " << method << ": best epoch " << log.best_epoch
              << " (val loss " << protospk::format_double(log.best_val_loss)
              << "), " << log.entries.size() << " epochs run; artifacts in "
              << out_path << '\n';
  });

  // ---- eval-fewshot ----------------------------------------------------------
  CLI::App *fewshot_cmd = app.add_subcommand(
      "eval-fewshot", "Few-shot classification protocol: repeated shot draws "
                      "per session, macro-F1");
  fewshot_cmd->add_option("--corpus", corpus_path, "EMB-CSV v1 corpus")
      ->required();
  fewshot_cmd->add_option("--method", method, "proto | base | base-backprop")
      ->required()
      ->check(CLI::IsMember({"proto", "base", "base-backprop"}));
  fewshot_cmd->add_option("--model", model_path, "Checkpoint produced by train")
      ->required();
  fewshot_cmd->add_option("--distance", distance_str,
                          "sqeuclidean | euclidean (proto only)")
      ->check(CLI::IsMember({"sqeuclidean", "euclidean"}));
  fewshot_cmd->add_option("--shots", shots, "Labeled shots per class");
  fewshot_cmd->add_option("--repeats", repeats, "Shot redraws per session");
  fewshot_cmd->add_option("--finetune_steps", finetune_steps,
                          "Adam steps on the shots (base-backprop)");
  fewshot_cmd->add_option("--finetune_lr", finetune_lr,
                          "Fine-tuning learning rate (base-backprop)");
  fewshot_cmd->add_option("--sessions", session_ids,
                          "Session ids to evaluate (default: all)");
  fewshot_cmd->add_option("--seed", seed, "Master seed");
  fewshot_cmd->add_option("--jobs", jobs, "Worker threads (never changes output)");
  fewshot_cmd->add_option("--out", out_path, "Output report directory")
      ->required();
  add_config_flag(fewshot_cmd);

  fewshot_cmd->callback([&]() {
    const protospk::Corpus corpus = protospk::load_corpus(corpus_path);
    const std::vector<std::string> ids =
        session_ids.empty() ? all_session_ids(corpus) : session_ids;
    const auto sessions = protospk::collect_sessions(corpus, ids);

    protospk::FewshotModel model;
    model.method = method;
    protospk::EncoderParams encoder_params;
    protospk::ClassifierParams classifier_params;
    if (method == "proto") {
      encoder_params = protospk::load_checkpoint(model_path);
      model.proto_params = &encoder_params;
      model.distance = protospk::distance_from_name(distance_str);
    } else {
      classifier_params = protospk::load_classifier_checkpoint(model_path);
      model.classifier = &classifier_params;
      model.finetune_steps = finetune_steps;
      model.finetune_lr = finetune_lr;
    }

    protospk::EvalReport report =
        protospk::eval_fewshot(model, sessions, shots, repeats, seed, jobs);
    std::filesystem::create_directories(out_path);
    const std::filesystem::path out_dir(out_path);
    protospk::write_report_csv({report}, (out_dir / "report.csv").string());
    protospk::write_reports_json({report}, (out_dir / "report.json").string());

    ordered_json manifest = manifest_base("eval-fewshot", seed, corpus_path);
    manifest["config"] = {
        {"method", method},   {"model", model_path},
        {"distance", distance_str}, {"shots", shots},
        {"repeats", repeats}, {"finetune_steps", finetune_steps},
        {"finetune_lr", finetune_lr}, {"sessions", ids},
        {"seed", seed},       {"out", out_path},
    };
    write_manifest(manifest, dir_manifest(out_path));
    std::cout << "fewshot " << method << ": corpus mean macro-F1 = "
              << protospk::format_double(report.corpus_mean) << " over "
              << ids.size() << " sessions; reports in " << out_path << '\n';
  });

  // ---- eval-cluster ----------------------------------------------------------
  CLI::App *cluster_cmd = app.add_subcommand(
      "eval-cluster", "Unsupervised clustering protocol: k = 2 per session, "
                      "purity");
  cluster_cmd->add_option("--corpus", corpus_path, "EMB-CSV v1 corpus")
      ->required();
  cluster_cmd->add_option("--algo", algo, "kmeans | spectral")
      ->required()
      ->check(CLI::IsMember({"kmeans", "spectral"}));
  cluster_cmd->add_option("--embeddings", embeddings, "raw | proto | siamese")
      ->required()
      ->check(CLI::IsMember({"raw", "proto", "siamese"}));
  cluster_cmd->add_option("--model", model_path,
                          "Checkpoint (required unless --embeddings raw)");
  cluster_cmd->add_option("--sessions", session_ids,
                          "Session ids to evaluate (default: all)");
  cluster_cmd->add_option("--seed", seed, "Master seed");
  cluster_cmd->add_option("--jobs", jobs, "Worker threads (never changes output)");
  cluster_cmd->add_option("--out", out_path, "Output report directory")
      ->required();
  add_config_flag(cluster_cmd);

  cluster_cmd->callback([&]() {
    const protospk::Corpus corpus = protospk::load_corpus(corpus_path);
    const std::vector<std::string> ids =
        session_ids.empty() ? all_session_ids(corpus) : session_ids;
    const auto sessions = protospk::collect_sessions(corpus, ids);

    protospk::EncoderParams encoder_params;
    protospk::EmbeddingSource source{embeddings, nullptr};
    if (embeddings != "raw") {
      encoder_params = load_embedding_encoder(embeddings, model_path);
      source.encoder = &encoder_params;
    }

    protospk::EvalReport report =
        protospk::eval_cluster(source, sessions, algo, seed, jobs);
    std::filesystem::create_directories(out_path);
    const std::filesystem::path out_dir(out_path);
    protospk::write_report_csv({report}, (out_dir / "report.csv").string());
    protospk::write_reports_json({report}, (out_dir / "report.json").string());

    ordered_json manifest = manifest_base("eval-cluster", seed, corpus_path);
    manifest["config"] = {
        {"algo", algo},     {"embeddings", embeddings},
        {"model", model_path.empty() ? "none" : model_path},
        {"sessions", ids},  {"seed", seed},
        {"out", out_path},
    };
    write_manifest(manifest, dir_manifest(out_path));
    std::cout << "cluster " << embeddings << "/" << algo
              << ": corpus mean purity = "
              << protospk::format_double(report.corpus_mean) << " over "
              << ids.size() << " sessions; reports in " << out_path << '\n';
  });

  // ---- crossval --------------------------------------------------------------
  std::string cluster_algo = "kmeans";
  CLI::App *crossval_cmd = app.add_subcommand(
      "crossval", "K-fold cross-validation: train per fold, evaluate the "
                  "protocols applicable to the method, aggregate");
  crossval_cmd->add_option("--corpus", corpus_path, "EMB-CSV v1 corpus")
      ->required();
  crossval_cmd->add_option("--method", method, "proto | siamese | base")
      ->required()
      ->check(CLI::IsMember({"proto", "siamese", "base"}));
  crossval_cmd->add_option("--folds", n_folds, "Number of folds");
  crossval_cmd->add_option("--val", n_val, "Validation sessions per fold");
  crossval_cmd->add_option("--k", k_supports, "Supports per class (proto)");
  crossval_cmd->add_option("--distance", distance_str,
                           "sqeuclidean | euclidean (proto)")
      ->check(CLI::IsMember({"sqeuclidean", "euclidean"}));
  crossval_cmd->add_option("--algo", cluster_algo,
                           "Clustering algorithm: kmeans | spectral")
      ->check(CLI::IsMember({"kmeans", "spectral"}));
  crossval_cmd->add_option("--shots", shots, "Labeled shots per class");
  crossval_cmd->add_option("--repeats", repeats, "Shot redraws per session");
  crossval_cmd->add_option("--finetune_steps", finetune_steps,
                           "Adam steps on the shots (base-backprop)");
  crossval_cmd->add_option("--finetune_lr", finetune_lr,
                           "Fine-tuning learning rate (base-backprop)");
  crossval_cmd->add_option("--batch_size", batch_size,
                           "Episode/pair/pooled batch size");
  crossval_cmd->add_option("--max_epochs", max_epochs, "Maximum training epochs");
  crossval_cmd->add_option("--patience", patience, "Early-stopping patience");
  crossval_cmd->add_option("--lr", lr, "Adam learning rate");
  crossval_cmd->add_option("--seed", seed, "Master seed");
  crossval_cmd->add_option("--jobs", jobs,
                           "Worker threads (never changes output)");
  crossval_cmd->add_option("--out", out_path, "Output run directory")
      ->required();
  add_config_flag(crossval_cmd);

  crossval_cmd->callback([&]() {
    const protospk::Corpus corpus = protospk::load_corpus(corpus_path);
    protospk::CrossvalConfig config;
    config.method = method;
    config.n_folds = n_folds;
    config.n_val = n_val;
    config.k_supports = k_supports;
    config.distance = protospk::distance_from_name(distance_str);
    config.cluster_algo = cluster_algo;
    config.shots = shots;
    config.repeats = repeats;
    config.finetune_steps = finetune_steps;
    config.finetune_lr = finetune_lr;
    config.batch_size = batch_size;
    config.max_epochs = max_epochs;
    config.patience = patience;
    config.lr = lr;
    config.seed = seed;
    config.jobs = jobs;
    config.out_dir = out_path;
    std::filesystem::create_directories(out_path);

    const protospk::CrossvalResult result = protospk::crossval(corpus, config);
    const std::filesystem::path out_dir(out_path);
    protospk::write_report_csv(result.aggregated,
                               (out_dir / "reports.csv").string());
    protospk::write_crossval_summary(result, config,
                                     (out_dir / "summary.json").string());
    for (const protospk::FoldOutcome &fold : result.folds)
      print_warnings(fold.train_log.warnings);

    ordered_json manifest = manifest_base("crossval", seed, corpus_path);
    manifest["config"] = {
        {"method", method},         {"folds", n_folds},
        {"val", n_val},             {"k", k_supports},
        {"distance", distance_str}, {"algo", cluster_algo},
        {"shots", shots},           {"repeats", repeats},
        {"finetune_steps", finetune_steps},
        {"finetune_lr", finetune_lr},
        {"batch_size", batch_size}, {"max_epochs", max_epochs},
        {"patience", patience},     {"lr", lr},
        {"seed", seed},             {"out", out_path},
    };
    manifest["fold_plan_hash"] = result.plan_hash;
    write_manifest(manifest, dir_manifest(out_path));

    for (const protospk::EvalReport &report : result.aggregated)
      std::cout << report.protocol << "/" << report.method << " mean "
                << report.metric << " = "
                << protospk::format_double(report.corpus_mean) << '\n';
    std::cout << "crossval artifacts in " << out_path << '\n';
  });

  // ---- project ---------------------------------------------------------------
  CLI::App *project_cmd = app.add_subcommand(
      "project", "2-d projection scatter plot (SVG + CSV) of session "
                 "embeddings");
  project_cmd->add_option("--corpus", corpus_path, "EMB-CSV v1 corpus")
      ->required();
  project_cmd->add_option("--embeddings", embeddings, "raw | proto | siamese")
      ->required()
      ->check(CLI::IsMember({"raw", "proto", "siamese"}));
  project_cmd->add_option("--model", model_path,
                          "Checkpoint (required unless --embeddings raw)");
  project_cmd->add_option("--algo", algo, "pca | tsne")
      ->required()
      ->check(CLI::IsMember({"pca", "tsne"}));
  project_cmd->add_option("--sessions", session_ids,
                          "Session ids to plot (default: all)");
  project_cmd->add_option("--perplexity", perplexity, "t-SNE perplexity");
  project_cmd->add_option("--iters", tsne_iters, "t-SNE iterations");
  project_cmd->add_option("--seed", seed, "Master seed");
  project_cmd->add_option("--out", out_path, "Output SVG path")->required();
  add_config_flag(project_cmd);

  project_cmd->callback([&]() {
    const protospk::Corpus corpus = protospk::load_corpus(corpus_path);
    const std::vector<std::string> ids =
        session_ids.empty() ? all_session_ids(corpus) : session_ids;
    const auto sessions = protospk::collect_sessions(corpus, ids);

    std::size_t total = 0;
    for (const protospk::Session *s : sessions) total += s->utterances.size();
    Eigen::MatrixXd points(static_cast<Eigen::Index>(total),
                           static_cast<Eigen::Index>(corpus.dim));
    std::vector<std::pair<std::string, protospk::Speaker>> labels;
    labels.reserve(total);
    Eigen::Index row = 0;
    for (const protospk::Session *s : sessions) {
      points.middleRows(row,
                        static_cast<Eigen::Index>(s->utterances.size())) =
          protospk::session_matrix(*s);
      for (const protospk::Utterance &u : s->utterances)
        labels.emplace_back(s->session_id, u.speaker);
      row += static_cast<Eigen::Index>(s->utterances.size());
    }

    protospk::EncoderParams encoder_params;
    if (embeddings != "raw") {
      encoder_params = load_embedding_encoder(embeddings, model_path);
      points = protospk::forward_eval(encoder_params, points);
    }

    Eigen::MatrixXd coords;
    if (algo == "pca") {
      coords = protospk::pca_project(points);
    } else {
      protospk::TsneConfig tc;
      tc.perplexity = perplexity;
      tc.iters = tsne_iters;
      tc.seed = seed;
      protospk::TsneResult result = protospk::tsne_project(points, tc);
      print_warnings(result.warnings);
      coords = std::move(result.coords);
    }
    protospk::emit_plot(coords, labels, out_path);

    ordered_json manifest = manifest_base("project", seed, corpus_path);
    manifest["config"] = {
        {"embeddings", embeddings},
        {"model", model_path.empty() ? "none" : model_path},
        {"algo", algo},
        {"sessions", ids},
        {"perplexity", perplexity},
        {"iters", tsne_iters},
        {"seed", seed},
        {"out", out_path},
    };
    write_manifest(manifest, file_manifest(out_path));
    std::cout << "projected " << total << " utterances (" << embeddings << "/"
              << algo << ") to " << out_path << '\n';
  });

  std::reverse(args.begin(), args.end());  // CLI11 vector parse order
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp &) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion &) {
    std::cout << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const protospk::Error &e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
