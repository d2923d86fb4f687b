// src/syngen.cc

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

#include "protospk/syngen.hpp"

#include <cstdio>
#include <vector>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"

namespace protospk {

GenConfig GenConfig::g1() {
  GenConfig c;
  c.name = "g1";
  return c;  // defaults are the g1 preset
}

GenConfig GenConfig::g2() {
  GenConfig c;
  c.name = "g2";
  c.n_sessions = 12;
  c.session_shift_scale = 2.0;
  c.utts_per_session_child_mean = 60;
  c.utts_per_session_child_spread = 20;
  c.utts_per_session_adult_mean = 180;
  c.utts_per_session_adult_spread = 60;
  return c;
}

void GenConfig::validate() const {
  if (dim < 2) throw Error("gen config: dim must be >= 2");
  if (n_sessions < 1) throw Error("gen config: n_sessions must be >= 1");
  if (class_separation < 0 || session_shift_scale < 0 ||
      speaker_scale_child < 0 || speaker_scale_adult < 0 ||
      utt_noise_scale < 0)
    throw Error("gen config: scales must be nonnegative");
  if (utts_per_session_child_mean < 1 || utts_per_session_adult_mean < 1)
    throw Error("gen config: utterance count means must be >= 1");
  if (utts_per_session_child_spread >= utts_per_session_child_mean ||
      utts_per_session_adult_spread >= utts_per_session_adult_mean)
    throw Error("gen config: spread must leave counts >= 1");
}

namespace {

void fill_gaussian(Rng &rng, double scale, std::vector<double> &out) {
  for (double &v : out) v = scale == 0.0 ? 0.0 : scale * rng.gaussian();
}

}  // namespace

Corpus generate(const GenConfig &config) {
  config.validate();
  Rng rng(config.seed);

  Corpus corpus;
  corpus.name = config.name;
  corpus.dim = config.dim;
  corpus.sessions.reserve(config.n_sessions);

  std::vector<double> channel(config.dim), speaker_child(config.dim),
      speaker_adult(config.dim), noise(config.dim);

  char idbuf[32];
  for (std::size_t s = 0; s < config.n_sessions; ++s) {
    std::snprintf(idbuf, sizeof(idbuf), "s%03zu", s);
    Session session;
    session.session_id = idbuf;

    const std::size_t n_child = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(config.utts_per_session_child_mean -
                                  config.utts_per_session_child_spread),
        static_cast<std::int64_t>(config.utts_per_session_child_mean +
                                  config.utts_per_session_child_spread)));
    const std::size_t n_adult = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(config.utts_per_session_adult_mean -
                                  config.utts_per_session_adult_spread),
        static_cast<std::int64_t>(config.utts_per_session_adult_mean +
                                  config.utts_per_session_adult_spread)));

    fill_gaussian(rng, config.session_shift_scale, channel);
    fill_gaussian(rng, config.speaker_scale_child, speaker_child);
    fill_gaussian(rng, config.speaker_scale_adult, speaker_adult);

    session.utterances.reserve(n_child + n_adult);
    std::size_t utt_counter = 0;
    const double half_sep = 0.5 * config.class_separation;

    for (int cls = 0; cls < 2; ++cls) {
      const bool child = cls == 0;
      const std::size_t count = child ? n_child : n_adult;
      const std::vector<double> &speaker = child ? speaker_child : speaker_adult;
      const double mean0 = child ? half_sep : -half_sep;
      for (std::size_t i = 0; i < count; ++i) {
        Utterance utt;
        utt.session_id = session.session_id;
        utt.speaker = child ? Speaker::kChild : Speaker::kAdult;
        std::snprintf(idbuf, sizeof(idbuf), "u%04zu", utt_counter++);
        utt.utt_id = idbuf;
        fill_gaussian(rng, config.utt_noise_scale, noise);
        utt.embedding.resize(config.dim);
        for (std::size_t d = 0; d < config.dim; ++d)
          utt.embedding[d] = (d == 0 ? mean0 : 0.0) + channel[d] + speaker[d] +
                             noise[d];
        session.utterances.push_back(std::move(utt));
      }
    }
    corpus.sessions.push_back(std::move(session));
  }
  return corpus;
}

}  // namespace protospk
