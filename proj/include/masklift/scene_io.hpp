#pragma once

#include <filesystem>

#include "masklift/scene.hpp"

namespace masklift {

/// .labels format: one integer per line, -1 = no label.
void save_labels(const LabelArray& labels, const std::filesystem::path& path);
LabelArray load_labels(const std::filesystem::path& path);

/// ASCII PLY with double-precision x y z and optional red green blue in
/// [0,1]. The reader also accepts float coordinates and uchar colors
/// (rescaled by 1/255) and skips unrecognized scalar properties.
void save_cloud_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_cloud_ply(const std::filesystem::path& path);

/// .cam format: four lines of four numbers, the world-to-camera matrix
/// [R|t; 0 0 0 1], then one line "fx fy cx cy W H".
void save_camera(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                 const std::filesystem::path& path);
void load_camera(const std::filesystem::path& path, CameraIntrinsics& intrinsics,
                 CameraPose& pose);

/// Depth PNG: 16-bit grayscale, stored value = round(depth_scale * meters),
/// 0 = invalid. Depths that quantize outside (0, 65535] are an error.
void save_depth_png(const DepthMap& depth, double depth_scale,
                    const std::filesystem::path& path);
DepthMap load_depth_png(const std::filesystem::path& path, double depth_scale);

/// Mask PNG: 16-bit grayscale, stored value = mask id (1..num_masks),
/// 0 = unsegmented.
void save_mask_png(const MaskSet2D& masks, const std::filesystem::path& path);
MaskSet2D load_mask_png(const std::filesystem::path& path);

/// Scene directory: meta.json, cloud.ply, sparse.labels, optional gt.labels,
/// and views/<name>.{cam,depth.png,mask.png}. Views load in lexicographic
/// name order; everything is validated on load with file-level error
/// messages.
void save_scene(const SceneBundle& scene, const std::filesystem::path& dir);
SceneBundle load_scene(const std::filesystem::path& dir);

}  // namespace masklift
