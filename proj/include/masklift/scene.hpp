#pragma once

#include <optional>
#include <string>
#include <vector>

#include "masklift/core.hpp"
#include "masklift/geometry.hpp"
#include "masklift/lift.hpp"

namespace masklift {

struct SceneMeta {
  int num_classes = 0;
  double depth_scale = 1000.0;  // stored depth value = depth_scale * meters
  double delta_depth = 0.05;    // depth matching tolerance the scene was built for
};

/// One camera's contribution to a scene: calibration, rendered/measured
/// depth, and the 2D segmentation to lift.
struct ViewObservation {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraPose pose;
  DepthMap depth;
  MaskSet2D mask2d;
};

struct SceneBundle {
  PointCloud cloud;
  std::optional<LabelArray> gt;
  LabelArray sparse;
  std::vector<ViewObservation> views;  // ordered by view name
  SceneMeta meta;

  Eigen::Index size() const { return cloud.size(); }
};

/// Cross-field checks: label lengths and ranges against the cloud and
/// num_classes, and per view that depth and mask share the intrinsics' size.
void validate_scene(const SceneBundle& scene, const std::string& context);

}  // namespace masklift
