#pragma once

#include <cmath>
#include <string>

#include "masklift/core.hpp"

namespace masklift {

/// Round-to-nearest with ties toward +inf. This is the single pixel rounding
/// rule used everywhere (projection lookup and rendering), so the two sides
/// of every visibility comparison quantize identically.
inline int pixel_round(double x) {
  return static_cast<int>(std::floor(x + 0.5));
}

/// pixel_round guarded against values an int cannot hold; -1 marks an
/// unusable coordinate (always out of bounds).
inline int pixel_from_raw(double raw) {
  if (!std::isfinite(raw) || std::abs(raw) > 1e9) {
    return -1;
  }
  return pixel_round(raw);
}

/// Points at or below this camera-space depth count as behind the camera.
inline constexpr double kMinCameraDepth = 1e-9;

struct CameraIntrinsics {
  double fx = 0, fy = 0;   // focal lengths, pixels
  double cx = 0, cy = 0;   // principal point, pixels
  int width = 0, height = 0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }
};

void validate_intrinsics(const CameraIntrinsics& intrinsics,
                         const std::string& context);

/// World-to-camera transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Rejects rotations that are not orthonormal (1e-6) or not right-handed.
void validate_pose(const CameraPose& pose, const std::string& context);

using ProjectionMatrix = Mat34;

/// M = K [R|t].
ProjectionMatrix compose_projection(const CameraIntrinsics& intrinsics,
                                    const CameraPose& pose);

struct DepthMap {
  Eigen::MatrixXd values;  // height x width, meters, 0 = invalid

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
};

void validate_depth(const DepthMap& depth, const std::string& context);

/// Raw (unrounded) projections of a cloud through one camera.
struct ProjectedPoints {
  Eigen::VectorXd u;      // pixel x before rounding
  Eigen::VectorXd v;      // pixel y before rounding
  Eigen::VectorXd depth;  // camera-space z'
  BoolArray behind;       // z' <= kMinCameraDepth

  Eigen::Index size() const { return depth.size(); }
};

/// (u, v) = (x'/z', y'/z') with (x', y', z') = M (x, y, z, 1). Behind-camera
/// points are flagged, not rejected; their u/v are whatever the division
/// produced and must not be consumed.
ProjectedPoints project_points(const PointCloud& cloud,
                               const ProjectionMatrix& projection);

/// Per-point pixel correspondence for one view. valid[i] == 1 means point i
/// landed inside the image, in front of the camera, on a pixel whose depth
/// map entry matches its own depth within the tolerance.
struct LinkMatrix {
  Eigen::VectorXi u;      // rounded pixel x, -1 when the projection is unusable
  Eigen::VectorXi v;      // rounded pixel y
  BoolArray valid;        // m_i
  Eigen::VectorXd depth;  // camera-space z', kept for diagnostics

  Eigen::Index size() const { return valid.size(); }
};

LinkMatrix build_link_matrix(const PointCloud& cloud,
                             const CameraIntrinsics& intrinsics,
                             const CameraPose& pose, const DepthMap& depth,
                             double depth_tolerance);

}  // namespace masklift
