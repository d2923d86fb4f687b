// tests/test_util.hpp

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

#ifndef PROTOSPK_TESTS_TEST_UTIL_HPP_
#define PROTOSPK_TESTS_TEST_UTIL_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "protospk/corpus.hpp"
#include "protospk/rng.hpp"

namespace testutil {

/// Fresh scratch directory under the system temp dir; wiped on each call so
/// reruns never see stale artifacts.
inline std::filesystem::path scratch_dir(const std::string &name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("protospk_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Hand-built session with seeded random embeddings: class means at
/// +/- separation/2 along the first axis plus unit noise.
inline protospk::Session random_session(const std::string &id,
                                        std::size_t n_child,
                                        std::size_t n_adult, std::size_t dim,
                                        std::uint64_t seed,
                                        double separation = 4.0) {
  protospk::Rng rng(seed);
  protospk::Session session;
  session.session_id = id;
  std::size_t counter = 0;
  auto add = [&](protospk::Speaker speaker, std::size_t n, double offset) {
    for (std::size_t i = 0; i < n; ++i) {
      protospk::Utterance utt;
      utt.session_id = id;
      utt.speaker = speaker;
      utt.utt_id = "u" + std::to_string(counter++);
      utt.embedding.resize(dim);
      for (std::size_t d = 0; d < dim; ++d)
        utt.embedding[d] = rng.gaussian() + (d == 0 ? offset : 0.0);
      session.utterances.push_back(std::move(utt));
    }
  };
  add(protospk::Speaker::kChild, n_child, separation / 2.0);
  add(protospk::Speaker::kAdult, n_adult, -separation / 2.0);
  return session;
}

inline protospk::Corpus random_corpus(std::size_t n_sessions,
                                      std::size_t n_child, std::size_t n_adult,
                                      std::size_t dim, std::uint64_t seed,
                                      double separation = 4.0) {
  protospk::Corpus corpus;
  corpus.name = "test";
  corpus.dim = dim;
  for (std::size_t s = 0; s < n_sessions; ++s) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%03zu", s);
    corpus.sessions.push_back(
        random_session(id, n_child, n_adult, dim, seed + s, separation));
  }
  return corpus;
}

inline std::vector<const protospk::Session *> session_ptrs(
    const protospk::Corpus &corpus) {
  std::vector<const protospk::Session *> out;
  for (const protospk::Session &s : corpus.sessions) out.push_back(&s);
  return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed) {
  protospk::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.gaussian();
  return m;
}

/// Relative error with a unit floor: |a-b| / max(1, |a|, |b|). The floor keeps
/// near-zero components from dividing finite-difference noise by itself.
inline double rel_err(double a, double b) {
  const double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

}  // namespace testutil

#endif  // PROTOSPK_TESTS_TEST_UTIL_HPP_
