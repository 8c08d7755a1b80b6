#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace masklift {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// One point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Per-point integer class labels. kIgnoreLabel marks unannotated points.
using LabelArray = Eigen::VectorXi;

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Sentinel for "no label". Stored as -1 in all on-disk label files so it can
/// never collide with class ids, which start at 0.
inline constexpr int kIgnoreLabel = -1;

[[noreturn]] inline void fail(const std::string& message) {
  throw std::runtime_error(message);
}

struct PointCloud {
  PointMatrix positions;                 // meters, world frame
  std::optional<PointMatrix> colors;     // per-point RGB in [0,1]

  Eigen::Index size() const { return positions.rows(); }
};

/// Checks N >= 1, finite coordinates, and color shape/range.
void validate_cloud(const PointCloud& cloud, const std::string& context);

/// Checks length and that every value lies in [0, num_classes) or is
/// kIgnoreLabel.
void validate_labels(const LabelArray& labels, int num_classes,
                     Eigen::Index expected_size, const std::string& context);

/// Number of non-ignore entries.
Eigen::Index count_labeled(const LabelArray& labels);

}  // namespace masklift
