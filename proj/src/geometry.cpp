#include "masklift/geometry.hpp"

namespace masklift {

void validate_intrinsics(const CameraIntrinsics& intrinsics,
                         const std::string& context) {
  if (!(intrinsics.fx > 0) || !(intrinsics.fy > 0)) {
    fail(context + ": focal lengths must be positive");
  }
  if (intrinsics.width < 1 || intrinsics.height < 1) {
    fail(context + ": image size must be at least 1x1");
  }
  if (!std::isfinite(intrinsics.cx) || !std::isfinite(intrinsics.cy)) {
    fail(context + ": principal point must be finite");
  }
}

void validate_pose(const CameraPose& pose, const std::string& context) {
  const Mat3 gram = pose.rotation.transpose() * pose.rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    fail(context + ": rotation is not orthonormal");
  }
  if (std::abs(pose.rotation.determinant() - 1.0) > 1e-6) {
    fail(context + ": rotation is not right-handed");
  }
  if (!pose.translation.allFinite()) {
    fail(context + ": translation must be finite");
  }
}

ProjectionMatrix compose_projection(const CameraIntrinsics& intrinsics,
                                    const CameraPose& pose) {
  validate_intrinsics(intrinsics, "compose_projection");
  validate_pose(pose, "compose_projection");
  Mat34 extrinsic;
  extrinsic << pose.rotation, pose.translation;
  return intrinsics.matrix() * extrinsic;
}

void validate_depth(const DepthMap& depth, const std::string& context) {
  for (Eigen::Index r = 0; r < depth.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < depth.values.cols(); ++c) {
      const double value = depth.values(r, c);
      if (!std::isfinite(value) || value < 0) {
        fail(context + ": invalid depth value at pixel (" + std::to_string(c) +
             "," + std::to_string(r) + ")");
      }
    }
  }
}

ProjectedPoints project_points(const PointCloud& cloud,
                               const ProjectionMatrix& projection) {
  const Eigen::Index n = cloud.size();
  PointMatrix camera = cloud.positions * projection.leftCols<3>().transpose();
  camera.rowwise() += projection.col(3).transpose();

  ProjectedPoints out;
  out.u = camera.col(0).array() / camera.col(2).array();
  out.v = camera.col(1).array() / camera.col(2).array();
  out.depth = camera.col(2);
  out.behind = camera.col(2).array() <= kMinCameraDepth;
  (void)n;
  return out;
}

LinkMatrix build_link_matrix(const PointCloud& cloud,
                             const CameraIntrinsics& intrinsics,
                             const CameraPose& pose, const DepthMap& depth,
                             double depth_tolerance) {
  if (!(depth_tolerance > 0)) {
    fail("build_link_matrix: depth tolerance must be positive");
  }
  if (depth.height() != intrinsics.height || depth.width() != intrinsics.width) {
    fail("build_link_matrix: depth map is " + std::to_string(depth.width()) +
         "x" + std::to_string(depth.height()) + " but intrinsics declare " +
         std::to_string(intrinsics.width) + "x" +
         std::to_string(intrinsics.height));
  }

  const ProjectedPoints projected =
      project_points(cloud, compose_projection(intrinsics, pose));
  const Eigen::Index n = projected.size();

  LinkMatrix link;
  link.u.resize(n);
  link.v.resize(n);
  link.valid = BoolArray::Constant(n, false);
  link.depth = projected.depth;

  for (Eigen::Index i = 0; i < n; ++i) {
    if (projected.behind[i]) {
      link.u[i] = -1;
      link.v[i] = -1;
      continue;
    }
    const int u = pixel_from_raw(projected.u[i]);
    const int v = pixel_from_raw(projected.v[i]);
    link.u[i] = u;
    link.v[i] = v;
    if (u < 0 || u >= intrinsics.width || v < 0 || v >= intrinsics.height) {
      continue;
    }
    const double mapped = depth.values(v, u);
    link.valid[i] =
        mapped > 0 && std::abs(mapped - projected.depth[i]) <= depth_tolerance;
  }
  return link;
}

}  // namespace masklift
