// src/viz.cc

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

#include "protospk/viz.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"
#include "protospk/textio.hpp"

namespace protospk {

Eigen::MatrixXd pca_project(const Eigen::MatrixXd &points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw Error("pca_project: need at least 2 points");
  const Eigen::Index m = points.cols();

  Eigen::RowVectorXd mean = points.colwise().mean();
  Eigen::MatrixXd centered = points.rowwise() - mean;

  Eigen::MatrixXd coords(n, 2);
  if (m < 2) {
    if (m == 1)
      coords.col(0) = centered.col(0);
    else
      coords.col(0).setZero();
    coords.col(1).setZero();
    return coords;
  }

  Eigen::MatrixXd covariance =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success)
    throw Error("pca_project: eigensolver failed to converge");

  // Eigenvalues ascend, so the top-2 components are the last two columns.
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd component = solver.eigenvectors().col(m - 1 - c);
    for (Eigen::Index j = 0; j < component.size(); ++j) {
      if (component(j) != 0.0) {
        if (component(j) < 0.0) component = -component;
        break;
      }
    }
    coords.col(c) = centered * component;
  }
  return coords;
}

Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd &points,
                                double perplexity, bool *degenerate_input,
                                std::vector<std::string> *warnings) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw Error("tsne: need at least 2 points");
  if (!(perplexity > 0.0)) throw Error("tsne: perplexity must be > 0");
  if (perplexity > static_cast<double>(n - 1))
    throw Error("tsne: perplexity must be < n - 1");
  if (warnings != nullptr &&
      static_cast<double>(n) < 3.0 * perplexity)
    warnings->push_back("t-SNE input has fewer than 3x perplexity points; "
                        "results may be unstable");

  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (points.row(i) - points.row(j)).squaredNorm();
      d2(i, j) = d;
      d2(j, i) = d;
    }
  }

  const double target_entropy = std::log(perplexity);
  Eigen::MatrixXd conditional = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) row_max = std::max(row_max, d2(i, j));
    if (row_max == 0.0) {
      // Every other point coincides with this one; entropy cannot be tuned.
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) conditional(i, j) = 1.0 / static_cast<double>(n - 1);
      if (degenerate_input != nullptr) *degenerate_input = true;
      continue;
    }

    // Bisection on the precision beta = 1/(2 sigma^2). The row kept is the
    // last finite normalized evaluation; steps whose mass underflows (beta
    // overshot, e.g. when the entropy is constant in beta for equidistant
    // points) only steer the bisection.
    double beta = 1.0;
    double beta_min = -std::numeric_limits<double>::infinity();
    double beta_max = std::numeric_limits<double>::infinity();
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd trial = Eigen::VectorXd::Zero(n);
    bool have_row = false;
    for (int step = 0; step < 64; ++step) {
      double sum_p = 0.0;
      double sum_dp = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          trial(j) = 0.0;
          continue;
        }
        trial(j) = std::exp(-beta * d2(i, j));
        sum_p += trial(j);
        sum_dp += d2(i, j) * trial(j);
      }
      if (sum_p <= 0.0) {
        beta_max = beta;
        beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
        continue;
      }
      const double entropy = std::log(sum_p) + beta * sum_dp / sum_p;
      row = trial / sum_p;
      have_row = true;
      const double diff = entropy - target_entropy;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {  // entropy too high -> sharpen
        beta_min = beta;
        beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
      } else {
        beta_max = beta;
        beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
      }
    }
    if (!have_row)
      // No finite bandwidth evaluated (astronomically scaled input): fall
      // back to a uniform row rather than emit zeros.
      for (Eigen::Index j = 0; j < n; ++j)
        row(j) = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
    conditional.row(i) = row.transpose();
  }

  Eigen::MatrixXd p =
      (conditional + conditional.transpose()) / (2.0 * static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) p(i, j) = std::max(p(i, j), 1e-12);
  return p;
}

std::pair<double, Eigen::MatrixXd> tsne_kl_and_grad(const Eigen::MatrixXd &p,
                                                    const Eigen::MatrixXd &y) {
  const Eigen::Index n = y.rows();
  if (p.rows() != n || p.cols() != n)
    throw Error("tsne: affinity matrix does not match coordinates");

  Eigen::MatrixXd num(n, n);  // Student-t kernel (1 + d^2)^-1, zero diagonal
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      num(i, j) = v;
      num(j, i) = v;
      z += 2.0 * v;
    }
  }

  double kl = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(num(i, j) / z, 1e-12);
      kl += p(i, j) * std::log(p(i, j) / q);
      const double coef = 4.0 * (p(i, j) - q) * num(i, j);
      grad.row(i) += coef * (y.row(i) - y.row(j));
    }
  }
  return {kl, grad};
}

TsneResult tsne_project(const Eigen::MatrixXd &points,
                        const TsneConfig &config) {
  const Eigen::Index n = points.rows();
  if (n > 5000) throw Error("tsne: exact variant is limited to 5000 points");

  TsneResult result;
  result.coords = Eigen::MatrixXd(n, 2);
  Eigen::MatrixXd p = tsne_affinities(points, config.perplexity,
                                      &result.degenerate_input,
                                      &result.warnings);

  Rng rng(config.seed);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = 1e-4 * rng.gaussian();

  constexpr std::size_t kExaggerationEnd = 250;
  constexpr double kExaggeration = 12.0;
  constexpr double kMinGain = 0.01;
  Eigen::MatrixXd exaggerated = p * kExaggeration;
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);

  result.kl_history.reserve(config.iters);
  for (std::size_t t = 0; t < config.iters; ++t) {
    const bool early = t < kExaggerationEnd;
    const auto [kl, grad] = tsne_kl_and_grad(early ? exaggerated : p, y);
    result.kl_history.push_back(kl);
    const double momentum = early ? 0.5 : 0.8;
    // Delta-bar-delta gains: grow a coordinate's step while its descent
    // direction is consistent, shrink it when the sign flips. Keeps the
    // fixed learning rate stable across embedding scales and point counts.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool climbing = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
        gains(i, c) = climbing ? gains(i, c) * 0.8 : gains(i, c) + 0.2;
        if (gains(i, c) < kMinGain) gains(i, c) = kMinGain;
      }
    }
    velocity = momentum * velocity -
               config.lr * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();  // keep the embedding centered
  }
  result.coords = y;
  return result;
}

namespace {

/// Shade per session within each class hue family (cycled when a plot has
/// more sessions than shades).
const char *kChildShades[3] = {"#7f1d1d", "#dc2626", "#f87171"};
const char *kAdultShades[3] = {"#1e3a8a", "#2563eb", "#93c5fd"};

std::string csv_sibling_path(const std::string &path) {
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + ".csv";
  return path.substr(0, dot) + ".csv";
}

}  // namespace

void emit_plot(const Eigen::MatrixXd &coords,
               const std::vector<std::pair<std::string, Speaker>> &labels,
               const std::string &path) {
  const Eigen::Index n = coords.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error("emit_plot: coordinates and labels disagree in length");

  std::map<std::string, std::size_t> session_shade;
  {
    std::set<std::string> sessions;
    for (const auto &[session_id, speaker] : labels) sessions.insert(session_id);
    std::size_t index = 0;
    for (const std::string &id : sessions) session_shade[id] = index++;
  }

  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (n > 0) {
    min_x = coords.col(0).minCoeff();
    max_x = coords.col(0).maxCoeff();
    min_y = coords.col(1).minCoeff();
    max_y = coords.col(1).maxCoeff();
    if (min_x == max_x) {
      min_x -= 0.5;
      max_x += 0.5;
    }
    if (min_y == max_y) {
      min_y -= 0.5;
      max_y += 0.5;
    }
  }

  constexpr double kWidth = 640.0, kHeight = 480.0, kMargin = 40.0;
  auto sx = [&](double x) {
    return kMargin + (x - min_x) / (max_x - min_x) * (kWidth - 2.0 * kMargin);
  };
  auto sy = [&](double y) {
    // SVG y grows downward.
    return kHeight - kMargin -
           (y - min_y) / (max_y - min_y) * (kHeight - 2.0 * kMargin);
  };

  std::ofstream svg(path, std::ios::binary);
  if (!svg) throw Error(path + ": cannot open for writing");
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  svg << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
      << kWidth - 2.0 * kMargin << "\" height=\"" << kHeight - 2.0 * kMargin
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &[session_id, speaker] = labels[static_cast<std::size_t>(i)];
    const std::size_t shade = session_shade[session_id] % 3;
    const char *color = speaker == Speaker::kChild ? kChildShades[shade]
                                                   : kAdultShades[shade];
    svg << "  <circle cx=\"" << format_double(sx(coords(i, 0))) << "\" cy=\""
        << format_double(sy(coords(i, 1))) << "\" r=\"3\" fill=\"" << color
        << "\" fill-opacity=\"0.8\"><title>" << session_id << ' '
        << speaker_name(speaker) << "</title></circle>\n";
  }
  // Legend: one row per (session, class) pair present.
  {
    double ly = kMargin + 14.0;
    std::set<std::pair<std::string, Speaker>> seen(labels.begin(), labels.end());
    for (const auto &[session_id, speaker] : seen) {
      const std::size_t shade = session_shade[session_id] % 3;
      const char *color = speaker == Speaker::kChild ? kChildShades[shade]
                                                     : kAdultShades[shade];
      svg << "  <circle cx=\"" << kWidth - kMargin - 110.0 << "\" cy=\""
          << format_double(ly - 4.0) << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
      svg << "  <text x=\"" << kWidth - kMargin - 100.0 << "\" y=\""
          << format_double(ly) << "\" font-family=\"sans-serif\" "
          << "font-size=\"11\" fill=\"#333333\">" << session_id << ' '
          << speaker_name(speaker) << "</text>\n";
      ly += 16.0;
    }
  }
  svg << "</svg>\n";
  if (!svg) throw Error(path + ": write failed");

  const std::string csv_path = csv_sibling_path(path);
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error(csv_path + ": cannot open for writing");
  csv << "x,y,session_id,speaker\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &[session_id, speaker] = labels[static_cast<std::size_t>(i)];
    csv << format_double(coords(i, 0)) << ',' << format_double(coords(i, 1))
        << ',' << session_id << ',' << speaker_name(speaker) << '\n';
  }
  if (!csv) throw Error(csv_path + ": write failed");
}

}  // namespace protospk
