// include/protospk/clustering.hpp

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

#ifndef PROTOSPK_CLUSTERING_HPP_
#define PROTOSPK_CLUSTERING_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "protospk/corpus.hpp"

namespace protospk {

// Unsupervised two-cluster algorithms and the purity metric. Both algorithms
// are deterministic for fixed (points, seed).

struct ClusterAssignment {
  std::vector<int> labels;    // cluster index per point
  double objective = 0.0;     // within-cluster sum of squared distances
  std::size_t iterations = 0; // Lloyd iterations of the winning restart
  bool degenerate = false;    // duplicate-data collapse or zero-norm rows
};

/// Lloyd's algorithm with k-means++ initialization, best of `restarts`
/// seeded restarts (ties go to the earlier restart). The objective is
/// asserted non-increasing across iterations. An emptied cluster is refilled
/// with the point farthest from its assigned center; when even that is
/// impossible (all points coincide) the result is flagged degenerate.
ClusterAssignment kmeans(const Eigen::MatrixXd &points, std::size_t k,
                         std::uint64_t seed, std::size_t restarts = 10,
                         std::size_t max_iter = 300, double tol = 1e-8);

/// Spectral clustering on the cosine affinity A_ij = (1 + cos(x_i, x_j)) / 2
/// (zero diagonal): symmetric normalized Laplacian, the 2 eigenvectors of
/// smallest eigenvalue, row-normalized, then k-means on the spectral rows.
/// Zero-norm input or embedding rows receive a deterministic 1e-12
/// perturbation and flag the result degenerate.
ClusterAssignment spectral(const Eigen::MatrixXd &points, std::size_t k,
                           std::uint64_t seed);

/// purity = (1/n) * sum over clusters of the largest single-class overlap.
double purity(const ClusterAssignment &assignment,
              const std::vector<Speaker> &truth);

}  // namespace protospk

#endif  // PROTOSPK_CLUSTERING_HPP_
