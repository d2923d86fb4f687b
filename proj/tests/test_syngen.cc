// tests/test_syngen.cc

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

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "protospk/error.hpp"
#include "protospk/syngen.hpp"
#include "test_util.hpp"

using protospk::Corpus;
using protospk::Error;
using protospk::GenConfig;
using protospk::generate;
using protospk::Speaker;

TEST_SUITE("syngen") {

TEST_CASE("with all offsets zeroed the class means are +-sep/2 on axis 0") {
  GenConfig config;
  config.dim = 4;
  config.n_sessions = 2;
  config.utts_per_session_child_mean = 5;
  config.utts_per_session_child_spread = 0;
  config.utts_per_session_adult_mean = 7;
  config.utts_per_session_adult_spread = 0;
  config.class_separation = 2.0;
  config.session_shift_scale = 0.0;
  config.speaker_scale_child = 0.0;
  config.speaker_scale_adult = 0.0;
  config.utt_noise_scale = 0.0;
  const Corpus corpus = generate(config);
  REQUIRE(corpus.sessions.size() == 2);
  for (const auto &session : corpus.sessions) {
    CHECK(session.count(Speaker::kChild) == 5);
    CHECK(session.count(Speaker::kAdult) == 7);
    for (const auto &utt : session.utterances) {
      const double expected0 = utt.speaker == Speaker::kChild ? 1.0 : -1.0;
      CHECK(utt.embedding[0] == expected0);
      for (std::size_t d = 1; d < config.dim; ++d)
        CHECK(utt.embedding[d] == 0.0);
    }
  }
}

TEST_CASE("generation is bit-deterministic in (config, seed)") {
  GenConfig config = GenConfig::g2();
  config.dim = 8;
  config.seed = 11;
  const Corpus a = generate(config);
  const Corpus b = generate(config);
  REQUIRE(a.sessions.size() == b.sessions.size());
  for (std::size_t s = 0; s < a.sessions.size(); ++s) {
    REQUIRE(a.sessions[s].utterances.size() == b.sessions[s].utterances.size());
    for (std::size_t u = 0; u < a.sessions[s].utterances.size(); ++u) {
      const auto &ua = a.sessions[s].utterances[u];
      const auto &ub = b.sessions[s].utterances[u];
      CHECK(ua.utt_id == ub.utt_id);
      CHECK(ua.speaker == ub.speaker);
      CHECK(ua.embedding == ub.embedding);
    }
  }
  config.seed = 12;
  const Corpus c = generate(config);
  CHECK(a.sessions[0].utterances[0].embedding !=
        c.sessions[0].utterances[0].embedding);
}

TEST_CASE("utterance counts stay inside mean +- spread") {
  GenConfig config;
  config.dim = 2;
  config.n_sessions = 40;
  config.utts_per_session_child_mean = 20;
  config.utts_per_session_child_spread = 5;
  config.utts_per_session_adult_mean = 30;
  config.utts_per_session_adult_spread = 10;
  config.seed = 3;
  const Corpus corpus = generate(config);
  bool child_edge_low = false, child_edge_high = false;
  for (const auto &session : corpus.sessions) {
    const std::size_t n_child = session.count(Speaker::kChild);
    const std::size_t n_adult = session.count(Speaker::kAdult);
    CHECK(n_child >= 15);
    CHECK(n_child <= 25);
    CHECK(n_adult >= 20);
    CHECK(n_adult <= 40);
    child_edge_low = child_edge_low || n_child <= 17;
    child_edge_high = child_edge_high || n_child >= 23;
  }
  // The draw actually spreads over the range rather than pinning the mean.
  CHECK(child_edge_low);
  CHECK(child_edge_high);
}

TEST_CASE("g1 preset has the documented shape") {
  const GenConfig config = GenConfig::g1();
  CHECK(config.name == "g1");
  CHECK(config.dim == 128);
  CHECK(config.n_sessions == 27);
  const Corpus corpus = generate(config);
  CHECK(corpus.name == "g1");
  CHECK(corpus.sessions.size() == 27);
  for (const auto &session : corpus.sessions) {
    CHECK(session.count(Speaker::kChild) >= 80);
    CHECK(session.count(Speaker::kChild) <= 160);
    CHECK(session.count(Speaker::kAdult) >= 160);
    CHECK(session.count(Speaker::kAdult) <= 280);
    CHECK(session.count(Speaker::kAdult) > session.count(Speaker::kChild) / 2);
  }
  // ids follow the zero-padded scheme and load-compatible charset
  CHECK(corpus.sessions[0].session_id == "s000");
  CHECK(corpus.sessions[26].session_id == "s026");
  CHECK(corpus.sessions[0].utterances[0].utt_id == "u0000");
}

TEST_CASE("g2 preset shifts the domain") {
  const GenConfig config = GenConfig::g2();
  CHECK(config.n_sessions == 12);
  CHECK(config.session_shift_scale > GenConfig::g1().session_shift_scale);
  const Corpus corpus = generate(config);
  CHECK(corpus.sessions.size() == 12);
}

TEST_CASE("session channel offset is shared, speaker offsets differ") {
  // One session, no utterance noise: every child utterance is identical,
  // every adult utterance is identical, and (child - adult) along d>=1 is
  // exactly the speaker-offset difference (channel cancels).
  GenConfig config;
  config.dim = 6;
  config.n_sessions = 1;
  config.utts_per_session_child_mean = 3;
  config.utts_per_session_child_spread = 0;
  config.utts_per_session_adult_mean = 3;
  config.utts_per_session_adult_spread = 0;
  config.class_separation = 0.0;
  config.utt_noise_scale = 0.0;
  config.seed = 21;
  const Corpus corpus = generate(config);
  const auto &utts = corpus.sessions[0].utterances;
  REQUIRE(utts.size() == 6);
  for (std::size_t u = 1; u < 3; ++u)
    CHECK(utts[u].embedding == utts[0].embedding);
  for (std::size_t u = 4; u < 6; ++u)
    CHECK(utts[u].embedding == utts[3].embedding);
  CHECK(utts[0].embedding != utts[3].embedding);
  // With class_separation = 0, axis 0 also carries only channel+speaker.
  double diff_norm = 0.0;
  for (std::size_t d = 0; d < config.dim; ++d) {
    const double diff = utts[0].embedding[d] - utts[3].embedding[d];
    diff_norm += diff * diff;
  }
  CHECK(diff_norm > 0.0);
}

TEST_CASE("invalid configs are rejected") {
  GenConfig config;
  SUBCASE("dim too small") {
    config.dim = 1;
    CHECK_THROWS_AS(generate(config), Error);
  }
  SUBCASE("negative scale") {
    config.utt_noise_scale = -0.5;
    CHECK_THROWS_AS(generate(config), Error);
  }
  SUBCASE("spread swallows the mean") {
    config.utts_per_session_child_mean = 10;
    config.utts_per_session_child_spread = 10;
    CHECK_THROWS_AS(generate(config), Error);
  }
  SUBCASE("zero sessions") {
    config.n_sessions = 0;
    CHECK_THROWS_AS(generate(config), Error);
  }
}

TEST_CASE("generated corpora satisfy the corpus invariants") {
  GenConfig config = GenConfig::g2();
  config.dim = 4;
  const Corpus corpus = generate(config);
  for (const auto &session : corpus.sessions) {
    CHECK(protospk::valid_id(session.session_id));
    CHECK(session.count(Speaker::kChild) >= 1);
    CHECK(session.count(Speaker::kAdult) >= 1);
    for (const auto &utt : session.utterances) {
      CHECK(utt.session_id == session.session_id);
      CHECK(protospk::valid_id(utt.utt_id));
      CHECK(utt.embedding.size() == config.dim);
      for (const double v : utt.embedding) CHECK(std::isfinite(v));
    }
  }
}

}  // TEST_SUITE
