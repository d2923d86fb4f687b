// include/protospk/corpus.hpp

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

#ifndef PROTOSPK_CORPUS_HPP_
#define PROTOSPK_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace protospk {

enum class Speaker { kChild, kAdult };

inline const char *speaker_name(Speaker s) {
  return s == Speaker::kChild ? "child" : "adult";
}

/// One fixed-length embedding with its session and speaker-class label.
struct Utterance {
  std::string session_id;
  Speaker speaker = Speaker::kChild;
  std::string utt_id;
  std::vector<double> embedding;
};

/// All utterances of one recording session. A session is the unit of
/// episodic training and of per-session evaluation; it always contains
/// at least one utterance of each class (enforced at load).
struct Session {
  std::string session_id;
  std::vector<Utterance> utterances;

  std::size_t count(Speaker s) const {
    std::size_t n = 0;
    for (const auto &u : utterances)
      if (u.speaker == s) ++n;
    return n;
  }

  /// Indices (into `utterances`) of the given class, in file order.
  std::vector<std::size_t> class_indices(Speaker s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < utterances.size(); ++i)
      if (utterances[i].speaker == s) idx.push_back(i);
    return idx;
  }
};

struct Corpus {
  std::string name;
  std::size_t dim = 0;
  std::vector<Session> sessions;

  std::size_t total_utterances() const {
    std::size_t n = 0;
    for (const auto &s : sessions) n += s.utterances.size();
    return n;
  }

  const Session *find_session(const std::string &id) const {
    for (const auto &s : sessions)
      if (s.session_id == id) return &s;
    return nullptr;
  }
};

/// One cross-validation fold: disjoint session-id sets whose union is the
/// whole corpus.
struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;
};

struct FoldPlan {
  std::vector<Fold> folds;

  /// Stable content hash, echoed into reports so a result can be traced to
  /// the exact split that produced it.
  std::uint64_t hash() const;
};

/// Reads an EMB-CSV v1 file. Validates the header, per-row field counts,
/// id charsets, value finiteness, dimension consistency, (session, utt) id
/// uniqueness and the both-classes-per-session invariant; failures name the
/// offending line.
Corpus load_corpus(const std::string &path);

/// Writes EMB-CSV v1. Embedding values are emitted as C hex-float tokens so
/// that load_corpus(save_corpus(c)) reproduces every double bit-exactly.
void save_corpus(const Corpus &corpus, const std::string &path);

/// Splits sessions into n_folds contiguous test blocks over a seeded shuffle
/// of the sorted session ids, then draws n_val validation sessions per fold
/// from the non-test remainder. Deterministic for a fixed seed.
FoldPlan make_folds(const Corpus &corpus, std::size_t n_folds,
                    std::size_t n_val, std::uint64_t seed);

/// Checks the textual id charset [A-Za-z0-9_-], nonempty.
bool valid_id(const std::string &id);

}  // namespace protospk

#endif  // PROTOSPK_CORPUS_HPP_
