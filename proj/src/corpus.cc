// src/corpus.cc

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

#include "protospk/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"

namespace protospk {

namespace {

[[noreturn]] void fail_line(const std::string &path, std::size_t line_no,
                            const std::string &what) {
  throw Error(path + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Accepts both the canonical hex-float tokens and plain decimal.
double parse_value(const std::string &token, const std::string &path,
                   std::size_t line_no) {
  if (token.empty() || std::isspace(static_cast<unsigned char>(token[0])))
    fail_line(path, line_no, "empty or padded embedding value");
  errno = 0;
  char *end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size())
    fail_line(path, line_no, "unparsable embedding value '" + token + "'");
  if (!std::isfinite(v))
    fail_line(path, line_no, "non-finite embedding value '" + token + "'");
  return v;
}

}  // namespace

bool valid_id(const std::string &id) {
  if (id.empty()) return false;
  for (const char c : id) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

Corpus load_corpus(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  std::size_t line_no = 1;

  constexpr const char *kHeaderPrefix = "emb_csv_v1,dim=";
  if (line.rfind(kHeaderPrefix, 0) != 0)
    fail_line(path, line_no, "malformed header, expected 'emb_csv_v1,dim=<D>'");
  const std::string dim_str = line.substr(std::strlen(kHeaderPrefix));
  char *end = nullptr;
  const long dim_l = std::strtol(dim_str.c_str(), &end, 10);
  if (end != dim_str.c_str() + dim_str.size() || dim_l <= 0)
    fail_line(path, line_no, "malformed header dimension '" + dim_str + "'");
  const std::size_t dim = static_cast<std::size_t>(dim_l);

  Corpus corpus;
  corpus.name = path;
  corpus.dim = dim;

  // Sessions keep first-appearance order; utterance order is file order.
  std::map<std::string, std::size_t> session_index;
  std::set<std::pair<std::string, std::string>> seen_ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 3 + dim)
      fail_line(path, line_no,
                "wrong field count, expected " + std::to_string(3 + dim) +
                    " got " + std::to_string(f.size()));

    Utterance utt;
    utt.session_id = f[0];
    utt.utt_id = f[2];
    if (!valid_id(utt.session_id))
      fail_line(path, line_no, "invalid session_id '" + f[0] + "'");
    if (!valid_id(utt.utt_id))
      fail_line(path, line_no, "invalid utt_id '" + f[2] + "'");
    if (f[1] == "child") {
      utt.speaker = Speaker::kChild;
    } else if (f[1] == "adult") {
      utt.speaker = Speaker::kAdult;
    } else {
      fail_line(path, line_no, "unknown speaker label '" + f[1] + "'");
    }
    if (!seen_ids.emplace(utt.session_id, utt.utt_id).second)
      fail_line(path, line_no,
                "duplicate (session_id, utt_id) = (" + utt.session_id + ", " +
                    utt.utt_id + ")");

    utt.embedding.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      utt.embedding[d] = parse_value(f[3 + d], path, line_no);

    auto it = session_index.find(utt.session_id);
    if (it == session_index.end()) {
      it = session_index.emplace(utt.session_id, corpus.sessions.size()).first;
      corpus.sessions.push_back(Session{utt.session_id, {}});
    }
    corpus.sessions[it->second].utterances.push_back(std::move(utt));
  }

  for (const auto &session : corpus.sessions) {
    if (session.count(Speaker::kChild) == 0 ||
        session.count(Speaker::kAdult) == 0)
      throw Error(path + ": session '" + session.session_id +
                  "' has utterances from only one speaker class");
  }
  return corpus;
}

void save_corpus(const Corpus &corpus, const std::string &path) {
  for (const auto &session : corpus.sessions) {
    if (!valid_id(session.session_id))
      throw Error("invalid session_id '" + session.session_id + "'");
    for (const auto &utt : session.utterances) {
      if (!valid_id(utt.utt_id))
        throw Error("invalid utt_id '" + utt.utt_id + "'");
      if (utt.session_id != session.session_id)
        throw Error("utterance '" + utt.utt_id + "' carries session_id '" +
                    utt.session_id + "' inside session '" +
                    session.session_id + "'");
      if (utt.embedding.size() != corpus.dim)
        throw Error("utterance '" + utt.utt_id + "' has dimension " +
                    std::to_string(utt.embedding.size()) + ", corpus declares " +
                    std::to_string(corpus.dim));
      for (const double v : utt.embedding)
        if (!std::isfinite(v))
          throw Error("non-finite embedding value in utterance '" +
                      utt.utt_id + "'");
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "emb_csv_v1,dim=" << corpus.dim << "\n";
  char buf[64];
  for (const auto &session : corpus.sessions) {
    for (const auto &utt : session.utterances) {
      out << utt.session_id << ',' << speaker_name(utt.speaker) << ','
          << utt.utt_id;
      for (const double v : utt.embedding) {
        std::snprintf(buf, sizeof(buf), "%a", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path);
}

std::uint64_t FoldPlan::hash() const {
  std::string blob;
  for (const auto &fold : folds) {
    for (const auto &id : fold.train_ids) blob += id + "|";
    blob += "/";
    for (const auto &id : fold.validation_ids) blob += id + "|";
    blob += "/";
    for (const auto &id : fold.test_ids) blob += id + "|";
    blob += ";";
  }
  return fnv1a64(blob.data(), blob.size());
}

FoldPlan make_folds(const Corpus &corpus, std::size_t n_folds,
                    std::size_t n_val, std::uint64_t seed) {
  const std::size_t n = corpus.sessions.size();
  if (n_folds == 0 || n == 0 || n % n_folds != 0)
    throw Error("cannot split " + std::to_string(n) + " sessions into " +
                std::to_string(n_folds) + " equal test blocks");
  const std::size_t block = n / n_folds;
  if (n_val + block >= n && !(n_val == 0 && block == n))
    throw Error("n_val=" + std::to_string(n_val) + " leaves no train sessions");

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto &s : corpus.sessions) ids.push_back(s.session_id);
  std::sort(ids.begin(), ids.end());

  Rng rng(seed);
  rng.shuffle(ids);

  FoldPlan plan;
  plan.folds.resize(n_folds);
  for (std::size_t f = 0; f < n_folds; ++f) {
    Fold &fold = plan.folds[f];
    fold.test_ids.assign(ids.begin() + f * block,
                         ids.begin() + (f + 1) * block);
    std::vector<std::string> rest;
    rest.reserve(n - block);
    for (std::size_t i = 0; i < n; ++i)
      if (i / block != f) rest.push_back(ids[i]);
    rng.shuffle(rest);
    if (n_val > rest.size())
      throw Error("n_val exceeds available non-test sessions");
    fold.validation_ids.assign(rest.begin(), rest.begin() + n_val);
    fold.train_ids.assign(rest.begin() + n_val, rest.end());
  }
  return plan;
}

}  // namespace protospk
