#pragma once

// Brute-force references the tests compare library results against. Each is
// written the slow, obvious way, independent of the library's algorithms and
// data layouts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "masklift/core.hpp"
#include "masklift/geometry.hpp"
#include "masklift/lift.hpp"
#include "masklift/rng.hpp"

namespace oracle {

/// Exhaustive per-pixel z-buffer over every point, quantized to the storage
/// grid the way rendered depth maps are written. 0 marks pixels no point
/// reaches.
inline Eigen::MatrixXd depth_grid(const masklift::PointCloud& cloud,
                                  const masklift::CameraIntrinsics& k,
                                  const masklift::CameraPose& pose,
                                  double depth_scale) {
  const masklift::ProjectedPoints projected = masklift::project_points(
      cloud, masklift::compose_projection(k, pose));
  Eigen::MatrixXd nearest = Eigen::MatrixXd::Constant(
      k.height, k.width, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < projected.size(); ++i) {
    if (projected.behind[i]) {
      continue;
    }
    const int u = masklift::pixel_from_raw(projected.u[i]);
    const int v = masklift::pixel_from_raw(projected.v[i]);
    if (u < 0 || u >= k.width || v < 0 || v >= k.height) {
      continue;
    }
    nearest(v, u) = std::min(nearest(v, u), projected.depth[i]);
  }
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(k.height, k.width);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      if (std::isfinite(nearest(r, c))) {
        grid(r, c) = static_cast<double>(
                         std::llround(nearest(r, c) * depth_scale)) /
                     depth_scale;
      }
    }
  }
  return grid;
}

/// Literal per-point visibility predicate against a depth grid: in front of
/// the camera, inside the image, pixel has valid depth, depth matches within
/// the tolerance.
inline masklift::BoolArray link_validity(const masklift::PointCloud& cloud,
                                         const masklift::CameraIntrinsics& k,
                                         const masklift::CameraPose& pose,
                                         const Eigen::MatrixXd& grid,
                                         double delta) {
  const masklift::ProjectedPoints projected = masklift::project_points(
      cloud, masklift::compose_projection(k, pose));
  masklift::BoolArray valid(projected.size());
  for (Eigen::Index i = 0; i < projected.size(); ++i) {
    bool ok = false;
    if (projected.depth[i] > masklift::kMinCameraDepth) {
      const int u = masklift::pixel_from_raw(projected.u[i]);
      const int v = masklift::pixel_from_raw(projected.v[i]);
      if (u >= 0 && u < k.width && v >= 0 && v < k.height) {
        const double d = grid(v, u);
        ok = d > 0 && std::abs(d - projected.depth[i]) <= delta;
      }
    }
    valid[i] = ok;
  }
  return valid;
}

/// Most frequent value; ties go to the smallest value. -1 when empty.
inline int mode_smallest(const std::vector<int>& values) {
  std::map<int, int> counts;
  for (const int v : values) {
    ++counts[v];
  }
  int best = masklift::kIgnoreLabel;
  int best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

/// Direct transcription of the propagation procedure: copy annotations, then
/// per mask fill with the modal reliable label when its share of the mask
/// exceeds eta, falling back to the modal annotation.
inline masklift::LabelArray propagate_reference(
    const masklift::LabelArray& y, const masklift::LabelArray& yr,
    const masklift::BoolMatrix& masks, double eta) {
  masklift::LabelArray out =
      masklift::LabelArray::Constant(y.size(), masklift::kIgnoreLabel);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != masklift::kIgnoreLabel) {
      out[i] = y[i];
    }
  }
  for (Eigen::Index t = 0; t < masks.rows(); ++t) {
    std::vector<Eigen::Index> members;
    std::vector<int> yr_values;
    std::vector<int> y_values;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!masks(t, i)) {
        continue;
      }
      members.push_back(i);
      if (yr[i] != masklift::kIgnoreLabel) {
        yr_values.push_back(yr[i]);
      }
      if (y[i] != masklift::kIgnoreLabel) {
        y_values.push_back(y[i]);
      }
    }
    if (members.empty()) {
      continue;
    }
    int fill = masklift::kIgnoreLabel;
    const int label_m = mode_smallest(yr_values);
    if (label_m != masklift::kIgnoreLabel) {
      Eigen::Index hits = 0;
      for (const int v : yr_values) {
        if (v == label_m) {
          ++hits;
        }
      }
      if (static_cast<double>(hits) /
              static_cast<double>(members.size()) >
          eta) {
        fill = label_m;
      }
    }
    if (fill == masklift::kIgnoreLabel && !y_values.empty()) {
      fill = mode_smallest(y_values);
    }
    if (fill != masklift::kIgnoreLabel) {
      for (const Eigen::Index i : members) {
        out[i] = fill;
      }
    }
  }
  return out;
}

/// Full-sort nearest-seed soft classifier with the same tie and edge rules
/// as the library's predictor: neighbor order by (distance, seed order),
/// coincident points get the smallest coincident class, total weight
/// underflow falls back to the nearest seed.
inline Eigen::MatrixXd knn_reference(const masklift::PointCloud& cloud,
                                     const masklift::LabelArray& seeds,
                                     int num_classes, int k,
                                     double temperature) {
  std::vector<Eigen::Index> seed_points;
  for (Eigen::Index i = 0; i < seeds.size(); ++i) {
    if (seeds[i] != masklift::kIgnoreLabel) {
      seed_points.push_back(i);
    }
  }
  const std::size_t k_eff =
      std::min<std::size_t>(static_cast<std::size_t>(k), seed_points.size());
  Eigen::MatrixXd probs =
      Eigen::MatrixXd::Zero(cloud.size(), num_classes);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(seed_points.size());
    for (std::size_t s = 0; s < seed_points.size(); ++s) {
      order.emplace_back(
          (cloud.positions.row(i) - cloud.positions.row(seed_points[s]))
              .norm(),
          s);
    }
    std::sort(order.begin(), order.end());
    if (order.front().first == 0.0) {
      int best = num_classes;
      for (const auto& [dist, s] : order) {
        if (dist > 0.0) {
          break;
        }
        best = std::min(best, seeds[seed_points[s]]);
      }
      probs(i, best) = 1.0;
      continue;
    }
    double total = 0;
    for (std::size_t s = 0; s < k_eff; ++s) {
      const double w = std::exp(-order[s].first / temperature);
      probs(i, seeds[seed_points[order[s].second]]) += w;
      total += w;
    }
    if (total <= 0) {
      probs.row(i).setZero();
      probs(i, seeds[seed_points[order.front().second]]) = 1.0;
    } else {
      probs.row(i) /= total;
    }
  }
  return probs;
}

/// Random rows strictly inside the simplex (entries bounded away from 0).
inline Eigen::MatrixXd random_distributions(masklift::Rng& rng,
                                            Eigen::Index n, Eigen::Index c) {
  Eigen::MatrixXd p(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      p(i, j) = 0.05 + rng.uniform();
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

/// Random labels in [0, c), with ignores mixed in when requested.
inline masklift::LabelArray random_labels(masklift::Rng& rng, Eigen::Index n,
                                          int c, double ignore_share) {
  masklift::LabelArray labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[i] = rng.uniform() < ignore_share
                    ? masklift::kIgnoreLabel
                    : static_cast<int>(rng.uniform_index(
                          static_cast<std::uint64_t>(c)));
  }
  return labels;
}

/// Point-disjoint nonempty masks over a random subset of n points.
inline masklift::BoolMatrix random_disjoint_masks(masklift::Rng& rng,
                                                  Eigen::Index n,
                                                  Eigen::Index max_masks) {
  std::vector<Eigen::Index> points(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    points[static_cast<std::size_t>(i)] = i;
  }
  for (std::size_t i = points.size(); i > 1; --i) {
    std::swap(points[i - 1], points[rng.uniform_index(i)]);
  }
  const Eigen::Index covered =
      1 + static_cast<Eigen::Index>(rng.uniform_index(
              static_cast<std::uint64_t>(n)));
  const Eigen::Index t = std::min<Eigen::Index>(
      covered, 1 + static_cast<Eigen::Index>(rng.uniform_index(
                       static_cast<std::uint64_t>(max_masks))));
  masklift::BoolMatrix masks = masklift::BoolMatrix::Constant(t, n, false);
  for (Eigen::Index p = 0; p < covered; ++p) {
    const Eigen::Index row =
        p < t ? p
              : static_cast<Eigen::Index>(
                    rng.uniform_index(static_cast<std::uint64_t>(t)));
    masks(row, points[static_cast<std::size_t>(p)]) = true;
  }
  return masks;
}

/// Central difference of f along the simplex tangent direction +h at (i, cp)
/// and -h at (i, cm): approximates dL/dp(i, cp) - dL/dp(i, cm). Probing in
/// the tangent space keeps every row a distribution.
inline double fd_pair(
    const std::function<double(const Eigen::MatrixXd&)>& f,
    const Eigen::MatrixXd& p, Eigen::Index i, Eigen::Index cp,
    Eigen::Index cm, double h) {
  Eigen::MatrixXd hi = p;
  Eigen::MatrixXd lo = p;
  hi(i, cp) += h;
  hi(i, cm) -= h;
  lo(i, cp) -= h;
  lo(i, cm) += h;
  return (f(hi) - f(lo)) / (2 * h);
}

inline double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace oracle
