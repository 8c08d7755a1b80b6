#include "masklift/core.hpp"

namespace masklift {

void validate_cloud(const PointCloud& cloud, const std::string& context) {
  const Eigen::Index n = cloud.positions.rows();
  if (n < 1) {
    fail(context + ": point cloud is empty");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(cloud.positions(i, c))) {
        fail(context + ": non-finite coordinate at point " + std::to_string(i));
      }
    }
  }
  if (cloud.colors) {
    if (cloud.colors->rows() != n) {
      fail(context + ": colors have " + std::to_string(cloud.colors->rows()) +
           " rows for " + std::to_string(n) + " points");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        const double value = (*cloud.colors)(i, c);
        if (!(value >= 0.0 && value <= 1.0)) {
          fail(context + ": color outside [0,1] at point " + std::to_string(i));
        }
      }
    }
  }
}

void validate_labels(const LabelArray& labels, int num_classes,
                     Eigen::Index expected_size, const std::string& context) {
  if (labels.size() != expected_size) {
    fail(context + ": expected " + std::to_string(expected_size) +
         " labels, got " + std::to_string(labels.size()));
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const int value = labels[i];
    if (value != kIgnoreLabel && (value < 0 || value >= num_classes)) {
      fail(context + ": label " + std::to_string(value) + " out of range [0," +
           std::to_string(num_classes) + ") at index " + std::to_string(i));
    }
  }
}

Eigen::Index count_labeled(const LabelArray& labels) {
  return (labels.array() != kIgnoreLabel).count();
}

}  // namespace masklift
