// include/protospk/viz.hpp

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

#ifndef PROTOSPK_VIZ_HPP_
#define PROTOSPK_VIZ_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "protospk/corpus.hpp"

namespace protospk {

// 2-D projections of raw and learned embeddings plus a scatter-plot emitter.

/// Centers the data and projects it onto the top-2 principal directions.
/// Sign convention: the first nonzero loading of each component is positive.
/// Inputs with fewer than 2 columns get a zero second coordinate.
Eigen::MatrixXd pca_project(const Eigen::MatrixXd &points);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iters = 1000;
  double lr = 200.0;
  std::uint64_t seed = 0;
};

struct TsneResult {
  Eigen::MatrixXd coords;          // n x 2
  std::vector<double> kl_history;  // KL per iteration (exaggerated P first 250)
  bool degenerate_input = false;   // duplicate-heavy rows detected
  std::vector<std::string> warnings;
};

/// Symmetrized, normalized input affinities with per-point bandwidths solved
/// by bisection to entropy log(perplexity) within 1e-5. Rows whose neighbors
/// all coincide fall back to uniform affinity and flag the input degenerate.
Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd &points,
                                double perplexity, bool *degenerate_input,
                                std::vector<std::string> *warnings);

/// KL(P || Q) under Student-t (1 d.o.f.) output affinities, and its gradient
/// w.r.t. the 2-D coordinates. Exposed separately so the gradient can be
/// checked against finite differences.
std::pair<double, Eigen::MatrixXd> tsne_kl_and_grad(const Eigen::MatrixXd &p,
                                                    const Eigen::MatrixXd &y);

/// Exact O(n^2) t-SNE: early exaggeration x12 for the first 250 iterations,
/// momentum 0.5 switching to 0.8 at iteration 250, fixed learning rate.
/// Deterministic per seed. Enforces n <= 5000.
TsneResult tsne_project(const Eigen::MatrixXd &points, const TsneConfig &config);

/// Writes a self-contained SVG scatter plot (child = red family, adult = blue
/// family, one shade per session) plus a CSV of coordinates and labels next
/// to it (same path with a .csv extension).
void emit_plot(const Eigen::MatrixXd &coords,
               const std::vector<std::pair<std::string, Speaker>> &labels,
               const std::string &path);

}  // namespace protospk

#endif  // PROTOSPK_VIZ_HPP_
