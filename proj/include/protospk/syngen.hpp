// include/protospk/syngen.hpp

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

#ifndef PROTOSPK_SYNGEN_HPP_
#define PROTOSPK_SYNGEN_HPP_

#include <cstdint>
#include <string>

#include "protospk/corpus.hpp"

namespace protospk {

/// Hierarchical sampling model for synthetic child-adult embedding corpora:
/// global class means +-(separation/2) along e0, a per-session channel
/// offset shared by both speakers, a per-(session, class) speaker offset,
/// and i.i.d. per-utterance noise. All offsets are isotropic Gaussians.
struct GenConfig {
  std::string name = "custom";
  std::size_t dim = 128;
  std::size_t n_sessions = 27;
  std::size_t utts_per_session_child_mean = 120;
  std::size_t utts_per_session_child_spread = 40;
  std::size_t utts_per_session_adult_mean = 220;
  std::size_t utts_per_session_adult_spread = 60;
  double class_separation = 3.0;
  double session_shift_scale = 1.2;
  double speaker_scale_child = 1.5;
  double speaker_scale_adult = 0.6;
  double utt_noise_scale = 1.0;
  std::uint64_t seed = 7;

  /// In-domain preset: 27 sessions, adult-heavy, child speaker variability
  /// larger than adult.
  static GenConfig g1();
  /// Domain-shift preset: fewer and smaller sessions, stronger channel
  /// offsets.
  static GenConfig g2();

  void validate() const;
};

/// Draws a corpus from the model. The RNG stream layout (per session:
/// child count, adult count, channel offset, child speaker offset, adult
/// speaker offset, then per-utterance noise, children first) is part of the
/// reproducibility contract; identical (config, seed) always yields a
/// bit-identical corpus.
Corpus generate(const GenConfig &config);

}  // namespace protospk

#endif  // PROTOSPK_SYNGEN_HPP_
