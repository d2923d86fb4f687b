// tests/test_viz.cc

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
#include <set>
#include <string>
#include <vector>

#include "protospk/clustering.hpp"
#include "protospk/error.hpp"
#include "protospk/rng.hpp"
#include "protospk/viz.hpp"
#include "test_util.hpp"

using protospk::Error;
using protospk::Rng;
using protospk::Speaker;
using protospk::TsneConfig;
using protospk::TsneResult;

namespace {

std::size_t count_occurrences(const std::string &haystack,
                              const std::string &needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_SUITE("viz") {

TEST_CASE("pca maps collinear points onto the first axis") {
  // Points on a line through R^4: the second component carries nothing.
  Eigen::MatrixXd points(6, 4);
  const Eigen::RowVector4d direction(1.0, -2.0, 0.5, 3.0);
  const Eigen::RowVector4d offset(5.0, 5.0, -1.0, 2.0);
  const double ts[] = {-3.0, -1.5, 0.0, 0.25, 1.0, 2.5};
  for (int i = 0; i < 6; ++i) points.row(i) = offset + ts[i] * direction;
  const Eigen::MatrixXd coords = protospk::pca_project(points);
  REQUIRE(coords.rows() == 6);
  REQUIRE(coords.cols() == 2);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(coords(i, 1)) < 1e-9);
  // Arc-length ratios along the line are preserved (up to overall sign).
  const double span = coords(5, 0) - coords(0, 0);
  for (int i = 1; i < 6; ++i) {
    const double expected = (ts[i] - ts[0]) / (ts[5] - ts[0]);
    CHECK(std::abs((coords(i, 0) - coords(0, 0)) / span - expected) < 1e-9);
  }
}

TEST_CASE("pca preserves pairwise distances for rank-2 data") {
  // Points drawn in a 2-D subspace of R^5: the 2-D projection is a rigid
  // map, so every pairwise distance survives exactly.
  Rng rng(61);
  Eigen::MatrixXd basis(2, 5);
  basis << 1, 0, 2, -1, 0.5, 0, 1, -1, 0.5, 2;
  Eigen::MatrixXd weights(10, 2);
  for (Eigen::Index r = 0; r < 10; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) weights(r, c) = rng.gaussian();
  const Eigen::MatrixXd points = weights * basis;
  const Eigen::MatrixXd coords = protospk::pca_project(points);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = i + 1; j < 10; ++j) {
      const double original = (points.row(i) - points.row(j)).norm();
      const double projected = (coords.row(i) - coords.row(j)).norm();
      CHECK(testutil::rel_err(projected, original) < 1e-8);
    }
  }
}

TEST_CASE("pca is translation invariant and deterministic") {
  const Eigen::MatrixXd points = testutil::random_matrix(12, 5, 62);
  const Eigen::MatrixXd coords = protospk::pca_project(points);
  Eigen::MatrixXd shifted = points;
  shifted.rowwise() += Eigen::RowVectorXd::Constant(5, 42.0);
  const Eigen::MatrixXd coords_shifted = protospk::pca_project(shifted);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(std::abs(coords(i, c) - coords_shifted(i, c)) < 1e-8);
  CHECK(protospk::pca_project(points) == coords);

  // The first component explains at least as much variance as the second.
  const Eigen::RowVector2d mean = coords.colwise().mean();
  const Eigen::MatrixXd centered = coords.rowwise() - mean;
  CHECK(centered.col(0).squaredNorm() >= centered.col(1).squaredNorm());
}

TEST_CASE("pca projected variance matches the top covariance eigenvalues") {
  const Eigen::MatrixXd points = testutil::random_matrix(40, 6, 63);
  const Eigen::MatrixXd coords = protospk::pca_project(points);
  // Independent spectrum: covariance eigenvalues via Eigen's solver on a
  // matrix assembled with plain loops.
  const Eigen::RowVectorXd mean = points.colwise().mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(6, 6);
  for (Eigen::Index r = 0; r < 40; ++r) {
    const Eigen::RowVectorXd d = points.row(r) - mean;
    cov += d.transpose() * d;
  }
  cov /= 39.0;  // unbiased
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  REQUIRE(solver.info() == Eigen::Success);
  const Eigen::VectorXd evals = solver.eigenvalues();  // ascending
  const double top1 = evals(5), top2 = evals(4);

  const Eigen::RowVector2d cmean = coords.colwise().mean();
  const Eigen::MatrixXd centered = coords.rowwise() - cmean;
  const double var0 = centered.col(0).squaredNorm() / 39.0;
  const double var1 = centered.col(1).squaredNorm() / 39.0;
  CHECK(testutil::rel_err(var0, top1) < 1e-8);
  CHECK(testutil::rel_err(var1, top2) < 1e-8);
}

TEST_CASE("pca handles single-column input with a zero second coordinate") {
  Eigen::MatrixXd points(4, 1);
  points << 1, 2, 3, 10;
  const Eigen::MatrixXd coords = protospk::pca_project(points);
  REQUIRE(coords.cols() == 2);
  CHECK(coords.col(1).isZero(0.0));
  CHECK_THROWS_AS(protospk::pca_project(points.topRows(1)), Error);
}

TEST_CASE("tsne affinities form a symmetric distribution with zero diagonal") {
  const Eigen::MatrixXd points = testutil::random_matrix(20, 4, 71);
  bool degenerate = false;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd p =
      protospk::tsne_affinities(points, 5.0, &degenerate, &warnings);
  REQUIRE(p.rows() == 20);
  REQUIRE(p.cols() == 20);
  CHECK(!degenerate);
  CHECK(warnings.empty());
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(p(i, i) == 0.0);
    for (Eigen::Index j = 0; j < 20; ++j) {
      CHECK(p(i, j) >= 0.0);
      CHECK(std::abs(p(i, j) - p(j, i)) < 1e-15);
    }
  }
}

TEST_CASE("tsne affinities are uniform on a regular simplex") {
  // Four pairwise-equidistant points: every off-diagonal affinity must be
  // exactly 1/12 regardless of the solved bandwidths.
  Eigen::MatrixXd points(4, 4);
  points.setIdentity();  // pairwise distance sqrt(2)
  bool degenerate = false;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd p =
      protospk::tsne_affinities(points, 2.0, &degenerate, &warnings);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (i != j) CHECK(std::abs(p(i, j) - 1.0 / 12.0) < 1e-9);
}

TEST_CASE("higher perplexity flattens the affinity distribution") {
  // Two clusters; low perplexity concentrates mass inside clusters, high
  // perplexity spreads it across.
  Eigen::MatrixXd points(10, 2);
  Rng rng(72);
  for (int i = 0; i < 5; ++i)
    points.row(i) << 0.1 * rng.gaussian(), 0.1 * rng.gaussian();
  for (int i = 5; i < 10; ++i)
    points.row(i) << 20.0 + 0.1 * rng.gaussian(), 0.1 * rng.gaussian();
  bool degenerate = false;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd low =
      protospk::tsne_affinities(points, 2.0, &degenerate, &warnings);
  const Eigen::MatrixXd high =
      protospk::tsne_affinities(points, 8.0, &degenerate, &warnings);
  double cross_low = 0.0, cross_high = 0.0;
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 5; j < 10; ++j) {
      cross_low += low(i, j) + low(j, i);
      cross_high += high(i, j) + high(j, i);
    }
  }
  CHECK(cross_high > cross_low);
}

TEST_CASE("duplicate-heavy input is flagged degenerate") {
  Eigen::MatrixXd points(6, 3);
  for (int i = 0; i < 6; ++i) points.row(i) << 1.0, 2.0, 3.0;
  bool degenerate = false;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd p =
      protospk::tsne_affinities(points, 2.0, &degenerate, &warnings);
  CHECK(degenerate);
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);

  // Distinct points stay non-degenerate; too few points for the requested
  // perplexity earns a warning instead.
  degenerate = false;
  warnings.clear();
  protospk::tsne_affinities(testutil::random_matrix(6, 3, 90), 2.5,
                            &degenerate, &warnings);
  CHECK(!degenerate);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("perplexity") != std::string::npos);
}

TEST_CASE("tsne KL gradient matches central differences") {
  const Eigen::MatrixXd points = testutil::random_matrix(8, 3, 81);
  bool degenerate = false;
  std::vector<std::string> warnings;
  const Eigen::MatrixXd p =
      protospk::tsne_affinities(points, 2.5, &degenerate, &warnings);
  const Eigen::MatrixXd y = testutil::random_matrix(8, 2, 82);
  const auto [kl, grad] = protospk::tsne_kl_and_grad(p, y);
  CHECK(kl >= 0.0);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      Eigen::MatrixXd plus = y, minus = y;
      plus(i, c) += h;
      minus(i, c) -= h;
      const double fd = (protospk::tsne_kl_and_grad(p, plus).first -
                         protospk::tsne_kl_and_grad(p, minus).first) /
                        (2 * h);
      INFO("coord (", i, ",", c, ")");
      CHECK(testutil::rel_err(grad(i, c), fd) < 1e-5);
    }
  }
}

TEST_CASE("tsne separates two blobs and reduces the KL objective") {
  Eigen::MatrixXd points(16, 4);
  Rng rng(91);
  std::vector<Speaker> truth;
  for (int i = 0; i < 8; ++i) {
    for (int d = 0; d < 4; ++d) points(i, d) = 0.3 * rng.gaussian();
    points(i, 0) += 10.0;
    truth.push_back(Speaker::kChild);
  }
  for (int i = 8; i < 16; ++i) {
    for (int d = 0; d < 4; ++d) points(i, d) = 0.3 * rng.gaussian();
    points(i, 0) -= 10.0;
    truth.push_back(Speaker::kAdult);
  }
  TsneConfig config;
  config.perplexity = 4.0;
  config.iters = 600;
  config.seed = 3;
  const TsneResult result = protospk::tsne_project(points, config);
  REQUIRE(result.coords.rows() == 16);
  REQUIRE(result.coords.cols() == 2);
  CHECK(result.kl_history.size() == 600);
  CHECK(!result.degenerate_input);

  // After early exaggeration ends the objective must keep improving overall,
  // and the trailing 100 iterations must be non-increasing.
  const double kl_at_switch = result.kl_history[250];
  const double kl_final = result.kl_history.back();
  CHECK(kl_final < kl_at_switch);
  for (std::size_t i = result.kl_history.size() - 100;
       i + 1 < result.kl_history.size(); ++i)
    CHECK(result.kl_history[i + 1] <= result.kl_history[i]);

  // The embedding separates the blobs: clustering the 2-D coordinates
  // recovers the true split.
  const protospk::ClusterAssignment clusters =
      protospk::kmeans(result.coords, 2, 1);
  CHECK(protospk::purity(clusters, truth) == 1.0);

  // Determinism.
  const TsneResult again = protospk::tsne_project(points, config);
  CHECK(again.coords == result.coords);
}

TEST_CASE("tsne validates its inputs") {
  const Eigen::MatrixXd points = testutil::random_matrix(10, 3, 95);
  TsneConfig config;
  config.perplexity = 30.0;  // >= n - 1
  CHECK_THROWS_AS(protospk::tsne_project(points, config), Error);
  bool degenerate = false;
  std::vector<std::string> warnings;
  CHECK_THROWS_AS(
      protospk::tsne_affinities(points, -1.0, &degenerate, &warnings), Error);
}

TEST_CASE("emit_plot writes an SVG and a CSV sibling") {
  const auto dir = testutil::scratch_dir("viz_plot");
  const Eigen::MatrixXd coords = testutil::random_matrix(12, 2, 96);
  std::vector<std::pair<std::string, Speaker>> labels;
  const char *ids[] = {"sA", "sB", "sC"};
  for (int i = 0; i < 12; ++i)
    labels.emplace_back(ids[i % 3],
                        i % 2 == 0 ? Speaker::kChild : Speaker::kAdult);
  const auto path = (dir / "plot.svg").string();
  protospk::emit_plot(coords, labels, path);

  const std::string svg = testutil::slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  // 12 data points (plus legend swatches): at least 12 circles.
  CHECK(count_occurrences(svg, "<circle") >= 12);
  // Six (session, speaker) combinations get six distinct fill colors.
  std::set<std::string> fills;
  std::size_t pos = 0;
  while ((pos = svg.find("fill=\"#", pos)) != std::string::npos) {
    fills.insert(svg.substr(pos + 6, 8));
    pos += 6;
  }
  // 6 marker colors plus fixed chrome colors.
  CHECK(fills.size() >= 6);

  const std::string csv = testutil::slurp((dir / "plot.csv").string());
  CHECK(count_occurrences(csv, "\n") == 13);  // header + 12 rows
  CHECK(csv.rfind("x,y,session_id,speaker\n", 0) == 0);
  CHECK(csv.find("sA,child") != std::string::npos);
  CHECK(csv.find("sB,adult") != std::string::npos);
}

TEST_CASE("emit_plot handles empty input and validates lengths") {
  const auto dir = testutil::scratch_dir("viz_empty");
  const Eigen::MatrixXd none(0, 2);
  const auto path = (dir / "empty.svg").string();
  protospk::emit_plot(none, {}, path);
  const std::string svg = testutil::slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(count_occurrences(svg, "<circle") == 0);
  const std::string csv = testutil::slurp((dir / "empty.csv").string());
  CHECK(csv == "x,y,session_id,speaker\n");

  const Eigen::MatrixXd coords = testutil::random_matrix(3, 2, 97);
  CHECK_THROWS_AS(
      protospk::emit_plot(coords, {{"s", Speaker::kChild}}, path), Error);
}

}  // TEST_SUITE
