#include "masklift/scene.hpp"

namespace masklift {

void validate_scene(const SceneBundle& scene, const std::string& context) {
  validate_cloud(scene.cloud, context + ": cloud");
  if (scene.meta.num_classes < 1) {
    fail(context + ": num_classes must be at least 1, got " +
         std::to_string(scene.meta.num_classes));
  }
  if (!(scene.meta.depth_scale > 0) ||
      !std::isfinite(scene.meta.depth_scale)) {
    fail(context + ": depth_scale must be positive and finite");
  }
  if (!(scene.meta.delta_depth > 0) ||
      !std::isfinite(scene.meta.delta_depth)) {
    fail(context + ": delta_depth must be positive and finite");
  }
  const Eigen::Index n = scene.cloud.size();
  validate_labels(scene.sparse, scene.meta.num_classes, n,
                  context + ": sparse labels");
  if (scene.gt.has_value()) {
    validate_labels(*scene.gt, scene.meta.num_classes, n,
                    context + ": gt labels");
  }
  for (const ViewObservation& view : scene.views) {
    const std::string view_context = context + ": view " + view.name;
    validate_intrinsics(view.intrinsics, view_context);
    validate_pose(view.pose, view_context);
    validate_depth(view.depth, view_context);
    if (view.depth.height() != view.intrinsics.height ||
        view.depth.width() != view.intrinsics.width) {
      fail(view_context + ": depth map is " +
           std::to_string(view.depth.width()) + "x" +
           std::to_string(view.depth.height()) + " but intrinsics declare " +
           std::to_string(view.intrinsics.width) + "x" +
           std::to_string(view.intrinsics.height));
    }
    if (view.mask2d.height() != view.intrinsics.height ||
        view.mask2d.width() != view.intrinsics.width) {
      fail(view_context + ": mask image is " +
           std::to_string(view.mask2d.width()) + "x" +
           std::to_string(view.mask2d.height()) + " but intrinsics declare " +
           std::to_string(view.intrinsics.width) + "x" +
           std::to_string(view.intrinsics.height));
    }
    validate_mask2d(view.mask2d, view_context);
  }
}

}  // namespace masklift
