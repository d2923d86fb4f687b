// tests/test_cli.cc

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

// Drives the installed protospk binary (path in $PROTOSPK_BIN) end to end:
// exit codes, artifacts, manifests, config-file expansion, reproducibility.

#include <doctest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "protospk/corpus.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string cli_binary() {
  const char *bin = std::getenv("PROTOSPK_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PROTOSPK_BIN must point at the binary");
  return bin;
}

std::string shell_quote(const std::string &s) {
  std::string quoted = "'";
  for (char c : s) {
    if (c == '\'') quoted += "'\\''";
    else quoted += c;
  }
  return quoted + "'";
}

RunResult run_cli(const std::vector<std::string> &args, const fs::path &dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  std::string cmd = shell_quote(cli_binary());
  for (const std::string &a : args) cmd += " " + shell_quote(a);
  cmd += " > " + shell_quote(out_file.string()) +
         " 2> " + shell_quote(err_file.string());
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = testutil::slurp(out_file);
  result.err = testutil::slurp(err_file);
  return result;
}

// Small separable corpus most CLI tests share: 6 sessions, dim 4,
// ~8 child / ~9 adult utterances each.
std::vector<std::string> tiny_gen_args(const std::string &out,
                                       const std::string &seed = "3") {
  return {"gen", "--dim", "4", "--n_sessions", "6",
          "--utts_per_session_child_mean", "8",
          "--utts_per_session_child_spread", "1",
          "--utts_per_session_adult_mean", "9",
          "--utts_per_session_adult_spread", "1",
          "--class_separation", "12",
          "--session_shift_scale", "0.5",
          "--speaker_scale_child", "0.5",
          "--speaker_scale_adult", "0.5",
          "--utt_noise_scale", "1",
          "--seed", seed, "--out", out};
}

nlohmann::json load_json(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), (path.string() + " missing"));
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 1") {
  const auto dir = testutil::scratch_dir("cli_usage");
  const RunResult none = run_cli({}, dir);
  CHECK(none.exit_code == 1);
  CHECK(none.err.find("protospk") != std::string::npos);

  const RunResult bad_flag = run_cli({"gen", "--no-such-flag", "1",
                                      "--out", (dir / "x.csv").string()}, dir);
  CHECK(bad_flag.exit_code == 1);

  const RunResult missing_required = run_cli({"gen"}, dir);
  CHECK(missing_required.exit_code == 1);

  const RunResult bad_subcommand = run_cli({"frobnicate"}, dir);
  CHECK(bad_subcommand.exit_code == 1);
}

TEST_CASE("version flag prints the tool version") {
  const auto dir = testutil::scratch_dir("cli_version");
  const RunResult r = run_cli({"--version"}, dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out == "protospk 1.0.0\n");
}

TEST_CASE("data errors exit with code 2") {
  const auto dir = testutil::scratch_dir("cli_data_err");
  const RunResult missing = run_cli(
      {"train", "--corpus", (dir / "absent.csv").string(), "--method", "proto",
       "--out", (dir / "run").string()},
      dir);
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("error:") != std::string::npos);

  // Invalid generator parameters are data errors, not usage errors.
  const RunResult bad_config = run_cli(
      {"gen", "--dim", "1", "--out", (dir / "c.csv").string()}, dir);
  CHECK(bad_config.exit_code == 2);
}

TEST_CASE("gen writes corpus plus manifest and reruns byte-identically") {
  const auto dir = testutil::scratch_dir("cli_gen");
  const auto c1 = (dir / "c1.csv").string();
  const auto c2 = (dir / "c2.csv").string();
  const RunResult r1 = run_cli(tiny_gen_args(c1, "11"), dir);
  REQUIRE_MESSAGE(r1.exit_code == 0, r1.err);
  CHECK(r1.out.find("wrote 6 sessions") != std::string::npos);

  const protospk::Corpus corpus = protospk::load_corpus(c1);
  CHECK(corpus.sessions.size() == 6);
  CHECK(corpus.dim == 4);

  const nlohmann::json manifest = load_json(dir / "c1.csv.manifest.json");
  CHECK(manifest.at("tool") == "protospk 1.0.0");
  CHECK(manifest.at("command") == "gen");
  CHECK(manifest.at("seed") == 11);
  CHECK(manifest.at("input") == "none");
  CHECK(manifest.at("config").at("n_sessions") == 6);
  CHECK(manifest.at("config").at("preset") == "none");

  const RunResult r2 = run_cli(tiny_gen_args(c2, "11"), dir);
  REQUIRE(r2.exit_code == 0);
  CHECK(testutil::slurp(c1) == testutil::slurp(c2));

  // A different seed changes the bytes.
  const auto c3 = (dir / "c3.csv").string();
  REQUIRE(run_cli(tiny_gen_args(c3, "12"), dir).exit_code == 0);
  CHECK(testutil::slurp(c1) != testutil::slurp(c3));
}

TEST_CASE("gen presets are accepted and overridable") {
  const auto dir = testutil::scratch_dir("cli_gen_preset");
  const auto path = (dir / "g1.csv").string();
  // Shrink the preset so the test stays fast; the preset supplies the rest.
  const RunResult r = run_cli(
      {"gen", "--preset", "g1", "--n_sessions", "2", "--dim", "8",
       "--utts_per_session_child_mean", "10",
       "--utts_per_session_child_spread", "2",
       "--utts_per_session_adult_mean", "12",
       "--utts_per_session_adult_spread", "2",
       "--out", path},
      dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const protospk::Corpus corpus = protospk::load_corpus(path);
  CHECK(corpus.sessions.size() == 2);
  CHECK(corpus.dim == 8);
  const nlohmann::json manifest = load_json(dir / "g1.csv.manifest.json");
  CHECK(manifest.at("config").at("preset") == "g1");
}

TEST_CASE("config file supplies flags and the command line overrides them") {
  const auto dir = testutil::scratch_dir("cli_config");
  const auto cfg_path = (dir / "gen.json").string();
  {
    std::ofstream cfg(cfg_path, std::ios::binary);
    cfg << R"({"dim": 3, "n_sessions": 4, "seed": 123,
               "utts_per_session_child_mean": 5,
               "utts_per_session_child_spread": 1,
               "utts_per_session_adult_mean": 6,
               "utts_per_session_adult_spread": 1})";
  }
  const auto path = (dir / "c.csv").string();
  const RunResult r = run_cli(
      {"gen", "--config", cfg_path, "--n_sessions", "2", "--out", path}, dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const protospk::Corpus corpus = protospk::load_corpus(path);
  CHECK(corpus.sessions.size() == 2);  // command line wins
  CHECK(corpus.dim == 3);              // config file supplies the rest
  const nlohmann::json manifest = load_json(dir / "c.csv.manifest.json");
  CHECK(manifest.at("seed") == 123);
  CHECK(manifest.at("config").at("n_sessions") == 2);

  // Broken config files are data errors.
  const auto broken = (dir / "broken.json").string();
  { std::ofstream out(broken, std::ios::binary); out << "{nope"; }
  const RunResult bad = run_cli(
      {"gen", "--config", broken, "--out", path}, dir);
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("invalid JSON") != std::string::npos);

  const RunResult absent = run_cli(
      {"gen", "--config", (dir / "ghost.json").string(), "--out", path}, dir);
  CHECK(absent.exit_code == 2);
}

TEST_CASE("train then eval-fewshot produces stable reports") {
  const auto dir = testutil::scratch_dir("cli_train_eval");
  const auto corpus_path = (dir / "c.csv").string();
  REQUIRE(run_cli(tiny_gen_args(corpus_path), dir).exit_code == 0);

  const auto run_dir = (dir / "run").string();
  const RunResult train = run_cli(
      {"train", "--corpus", corpus_path, "--method", "proto", "--k", "3",
       "--batch_size", "8", "--max_epochs", "4", "--patience", "2",
       "--val", "2", "--seed", "5", "--out", run_dir},
      dir);
  REQUIRE_MESSAGE(train.exit_code == 0, train.err);
  CHECK(fs::exists(fs::path(run_dir) / "checkpoint.pnck"));
  CHECK(fs::exists(fs::path(run_dir) / "trainlog.csv"));
  CHECK(fs::exists(fs::path(run_dir) / "manifest.json"));
  CHECK(train.out.find("trained proto") != std::string::npos);

  const auto model = (fs::path(run_dir) / "checkpoint.pnck").string();
  auto eval_args = [&](const std::string &out, const std::string &jobs) {
    return std::vector<std::string>{
        "eval-fewshot", "--corpus", corpus_path, "--method", "proto",
        "--model", model, "--shots", "2", "--repeats", "3", "--seed", "9",
        "--jobs", jobs, "--out", out};
  };
  const auto eval1 = (dir / "eval1").string();
  const auto eval2 = (dir / "eval2").string();
  const RunResult e1 = run_cli(eval_args(eval1, "1"), dir);
  REQUIRE_MESSAGE(e1.exit_code == 0, e1.err);
  CHECK(e1.out.find("corpus mean macro-F1") != std::string::npos);
  CHECK(fs::exists(fs::path(eval1) / "report.csv"));
  CHECK(fs::exists(fs::path(eval1) / "report.json"));
  CHECK(fs::exists(fs::path(eval1) / "manifest.json"));

  // Worker threads never change report bytes.
  REQUIRE(run_cli(eval_args(eval2, "3"), dir).exit_code == 0);
  CHECK(testutil::slurp(fs::path(eval1) / "report.csv") ==
        testutil::slurp(fs::path(eval2) / "report.csv"));
  CHECK(testutil::slurp(fs::path(eval1) / "report.json") ==
        testutil::slurp(fs::path(eval2) / "report.json"));

  // The train manifest records the input corpus digest.
  const nlohmann::json manifest =
      load_json(fs::path(run_dir) / "manifest.json");
  CHECK(manifest.at("input").at("path") == corpus_path);
  CHECK(manifest.at("input").at("fnv1a64").get<std::string>().size() == 16);
}

TEST_CASE("eval-cluster handles raw and model-backed sources") {
  const auto dir = testutil::scratch_dir("cli_cluster");
  const auto corpus_path = (dir / "c.csv").string();
  REQUIRE(run_cli(tiny_gen_args(corpus_path), dir).exit_code == 0);

  const auto out1 = (dir / "raw").string();
  const RunResult raw = run_cli(
      {"eval-cluster", "--corpus", corpus_path, "--algo", "kmeans",
       "--embeddings", "raw", "--sessions", "s000", "--sessions", "s002",
       "--seed", "4", "--out", out1},
      dir);
  REQUIRE_MESSAGE(raw.exit_code == 0, raw.err);
  CHECK(raw.out.find("corpus mean purity") != std::string::npos);
  const std::string csv = testutil::slurp(fs::path(out1) / "report.csv");
  // Header, two session rows, corpus mean.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("cluster,raw,purity,s000,") != std::string::npos);
  CHECK(csv.find("s001") == std::string::npos);

  // Encoder-backed sources require a model checkpoint.
  const RunResult no_model = run_cli(
      {"eval-cluster", "--corpus", corpus_path, "--algo", "kmeans",
       "--embeddings", "proto", "--out", (dir / "x").string()},
      dir);
  CHECK(no_model.exit_code == 2);
  CHECK(no_model.err.find("requires --model") != std::string::npos);
}

TEST_CASE("crossval writes summary, reports, and per-fold artifacts") {
  const auto dir = testutil::scratch_dir("cli_crossval");
  const auto corpus_path = (dir / "c.csv").string();
  REQUIRE(run_cli(tiny_gen_args(corpus_path), dir).exit_code == 0);

  auto cv_args = [&](const std::string &out, const std::string &jobs) {
    return std::vector<std::string>{
        "crossval", "--corpus", corpus_path, "--method", "proto",
        "--folds", "3", "--val", "2", "--k", "2", "--shots", "2",
        "--repeats", "2", "--batch_size", "6", "--max_epochs", "2",
        "--patience", "1", "--seed", "13", "--jobs", jobs, "--out", out};
  };
  const auto cv1 = (dir / "cv1").string();
  const RunResult r = run_cli(cv_args(cv1, "1"), dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("fewshot/proto mean macro_f1") != std::string::npos);
  CHECK(r.out.find("cluster/proto mean purity") != std::string::npos);
  CHECK(fs::exists(fs::path(cv1) / "reports.csv"));
  CHECK(fs::exists(fs::path(cv1) / "summary.json"));
  CHECK(fs::exists(fs::path(cv1) / "manifest.json"));
  for (int f = 0; f < 3; ++f) {
    const fs::path fold_dir = fs::path(cv1) / ("fold_" + std::to_string(f));
    CHECK(fs::exists(fold_dir / "checkpoint.pnck"));
    CHECK(fs::exists(fold_dir / "trainlog.csv"));
  }

  // Reruns and worker counts never change the summary bytes.
  const auto cv2 = (dir / "cv2").string();
  REQUIRE(run_cli(cv_args(cv2, "2"), dir).exit_code == 0);
  CHECK(testutil::slurp(fs::path(cv1) / "summary.json") ==
        testutil::slurp(fs::path(cv2) / "summary.json"));
  CHECK(testutil::slurp(fs::path(cv1) / "reports.csv") ==
        testutil::slurp(fs::path(cv2) / "reports.csv"));

  const nlohmann::json summary = load_json(fs::path(cv1) / "summary.json");
  CHECK(summary.at("folds").size() == 3);
  CHECK(summary.at("aggregated").size() == 2);
  const nlohmann::json manifest = load_json(fs::path(cv1) / "manifest.json");
  CHECK(manifest.at("fold_plan_hash") == summary.at("fold_plan_hash"));
}

TEST_CASE("project emits an SVG scatter plot with a CSV sibling") {
  const auto dir = testutil::scratch_dir("cli_project");
  const auto corpus_path = (dir / "c.csv").string();
  REQUIRE(run_cli(tiny_gen_args(corpus_path), dir).exit_code == 0);

  const auto svg_path = (dir / "plot.svg").string();
  const RunResult r = run_cli(
      {"project", "--corpus", corpus_path, "--embeddings", "raw",
       "--algo", "pca", "--sessions", "s001", "--out", svg_path},
      dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("projected") != std::string::npos);
  const std::string svg = testutil::slurp(svg_path);
  CHECK(svg.find("<svg") != std::string::npos);
  const std::string csv = testutil::slurp(dir / "plot.csv");
  CHECK(csv.rfind("x,y,session_id,speaker\n", 0) == 0);
  CHECK(csv.find("s001,child") != std::string::npos);
  CHECK(fs::exists(dir / "plot.svg.manifest.json"));
}

}  // TEST_SUITE
