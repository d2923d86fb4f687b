// src/clustering.cc

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

#include "protospk/clustering.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"

namespace protospk {

namespace {

struct LloydRun {
  std::vector<int> labels;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool degenerate = false;
};

/// D^2-weighted k-means++ seeding.
Eigen::MatrixXd kmeanspp_centers(const Eigen::MatrixXd &points, std::size_t k,
                                 Rng &rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
  centers.row(0) = points.row(
      static_cast<Eigen::Index>(rng.uniform_below(static_cast<std::size_t>(n))));
  Eigen::VectorXd min_d2 =
      (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    const double total = min_d2.sum();
    Eigen::Index choice;
    if (total <= 0.0) {
      // Every point coincides with a chosen center; any pick is equivalent.
      choice = static_cast<Eigen::Index>(
          rng.uniform_below(static_cast<std::size_t>(n)));
    } else {
      const double r = rng.uniform_double() * total;
      double cum = 0.0;
      choice = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += min_d2(i);
        if (cum > r) {
          choice = i;
          break;
        }
      }
    }
    centers.row(static_cast<Eigen::Index>(j)) = points.row(choice);
    if (j + 1 < k)
      min_d2 = min_d2.cwiseMin(
          (points.rowwise() - centers.row(static_cast<Eigen::Index>(j)))
              .rowwise()
              .squaredNorm());
  }
  return centers;
}

LloydRun lloyd(const Eigen::MatrixXd &points, std::size_t k, Rng &rng,
               std::size_t max_iter, double tol) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centers = kmeanspp_centers(points, k, rng);
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);

  auto assign = [&](double *objective_out) {
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = (points.row(i) - centers.row(0)).squaredNorm();
      for (std::size_t c = 1; c < k; ++c) {
        const double d2 =
            (points.row(i) - centers.row(static_cast<Eigen::Index>(c)))
                .squaredNorm();
        if (d2 < best_d2) {  // ties keep the lower cluster index
          best_d2 = d2;
          best = static_cast<int>(c);
        }
      }
      run.labels[static_cast<std::size_t>(i)] = best;
      objective += best_d2;
    }
    *objective_out = objective;
  };

  double prev_objective = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double objective;
    assign(&objective);
    // Lloyd's objective must never increase; a violation is an internal bug.
    if (objective > prev_objective + 1e-9 * (1.0 + prev_objective))
      throw Error("kmeans: objective increased across an iteration");

    // Refill emptied clusters with the farthest point before the mean update.
    std::vector<std::size_t> counts(k, 0);
    for (int label : run.labels) counts[static_cast<std::size_t>(label)]++;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      Eigen::Index farthest = -1;
      double farthest_d2 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t owner =
            static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)]);
        if (counts[owner] <= 1) continue;  // do not empty another cluster
        const double d2 =
            (points.row(i) -
             centers.row(static_cast<Eigen::Index>(owner)))
                .squaredNorm();
        if (d2 > farthest_d2) {
          farthest_d2 = d2;
          farthest = i;
        }
      }
      if (farthest < 0) {
        // All points coincide with their centers: a genuinely degenerate
        // duplicate-data case; the cluster stays empty.
        run.degenerate = true;
        continue;
      }
      counts[static_cast<std::size_t>(
          run.labels[static_cast<std::size_t>(farthest)])]--;
      run.labels[static_cast<std::size_t>(farthest)] = static_cast<int>(c);
      counts[c] = 1;
      objective -= farthest_d2;  // the point becomes its own center
    }

    Eigen::MatrixXd new_centers = Eigen::MatrixXd::Zero(centers.rows(),
                                                        centers.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      new_centers.row(run.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0)
        new_centers.row(static_cast<Eigen::Index>(c)) /=
            static_cast<double>(counts[c]);
      else
        new_centers.row(static_cast<Eigen::Index>(c)) =
            centers.row(static_cast<Eigen::Index>(c));
    }

    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      movement = std::max(
          movement, (new_centers.row(static_cast<Eigen::Index>(c)) -
                     centers.row(static_cast<Eigen::Index>(c)))
                        .norm());
    centers = std::move(new_centers);
    run.iterations = iter + 1;
    prev_objective = objective;
    if (movement < tol) break;
  }

  // Final assignment against the final centers so labels, centers and
  // objective are mutually consistent.
  assign(&run.objective);
  if (run.objective > prev_objective + 1e-9 * (1.0 + prev_objective))
    throw Error("kmeans: objective increased at the final assignment");
  std::vector<std::size_t> counts(k, 0);
  for (int label : run.labels) counts[static_cast<std::size_t>(label)]++;
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] == 0) run.degenerate = true;
  return run;
}

}  // namespace

ClusterAssignment kmeans(const Eigen::MatrixXd &points, std::size_t k,
                         std::uint64_t seed, std::size_t restarts,
                         std::size_t max_iter, double tol) {
  if (k < 1) throw Error("kmeans: k must be >= 1");
  if (points.rows() < static_cast<Eigen::Index>(k))
    throw Error("kmeans: need at least k points");
  if (restarts < 1) throw Error("kmeans: restarts must be >= 1");

  Rng rng(seed);
  LloydRun best;
  bool has_best = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    LloydRun run = lloyd(points, k, rng, max_iter, tol);
    if (!has_best || run.objective < best.objective) {
      best = std::move(run);
      has_best = true;
    }
  }
  ClusterAssignment out;
  out.labels = std::move(best.labels);
  out.objective = best.objective;
  out.iterations = best.iterations;
  out.degenerate = best.degenerate;
  return out;
}

ClusterAssignment spectral(const Eigen::MatrixXd &points, std::size_t k,
                           std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw Error("spectral: need at least 2 points");
  if (k < 1 || static_cast<Eigen::Index>(k) > n)
    throw Error("spectral: k out of range");

  bool degenerate = false;
  Eigen::MatrixXd x = points;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x.row(i).norm() == 0.0) {
      // Cosine similarity is undefined for the zero vector; a tiny uniform
      // perturbation keeps the pipeline deterministic.
      x.row(i).setConstant(1e-12);
      degenerate = true;
    }
  }

  Eigen::VectorXd norms = x.rowwise().norm();
  Eigen::MatrixXd affinity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    affinity(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double cosine = x.row(i).dot(x.row(j)) / (norms(i) * norms(j));
      cosine = std::clamp(cosine, -1.0, 1.0);
      const double a = (1.0 + cosine) / 2.0;
      affinity(i, j) = a;
      affinity(j, i) = a;
    }
  }

  Eigen::VectorXd degree = affinity.rowwise().sum();
  Eigen::VectorXd dinv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dinv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  Eigen::MatrixXd laplacian =
      Eigen::MatrixXd::Identity(n, n) -
      (dinv_sqrt.asDiagonal() * affinity * dinv_sqrt.asDiagonal());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
  if (solver.info() != Eigen::Success)
    throw Error("spectral: eigensolver failed to converge");
  // Eigenvalues come back ascending; the spectral embedding uses the k
  // smallest.
  Eigen::MatrixXd embedding =
      solver.eigenvectors().leftCols(static_cast<Eigen::Index>(k));

  for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
    const double norm = embedding.row(i).norm();
    if (norm == 0.0) {
      embedding.row(i).setConstant(1e-12);
      degenerate = true;
    }
    embedding.row(i) /= embedding.row(i).norm();
  }

  ClusterAssignment assignment = kmeans(embedding, k, seed);
  assignment.degenerate = assignment.degenerate || degenerate;
  return assignment;
}

double purity(const ClusterAssignment &assignment,
              const std::vector<Speaker> &truth) {
  if (assignment.labels.size() != truth.size())
    throw Error("purity: assignment and truth disagree in length");
  if (truth.empty()) throw Error("purity: empty input");
  std::map<int, std::array<std::size_t, 2>> counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto &slot = counts[assignment.labels[i]];
    slot[truth[i] == Speaker::kChild ? 0 : 1]++;
  }
  std::size_t agree = 0;
  for (const auto &[label, slot] : counts) agree += std::max(slot[0], slot[1]);
  return static_cast<double>(agree) / static_cast<double>(truth.size());
}

}  // namespace protospk
