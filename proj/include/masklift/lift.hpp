#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "masklift/core.hpp"
#include "masklift/geometry.hpp"

namespace masklift {

/// Per-view 2D segmentation, stored as an id map: 0 = unsegmented pixel,
/// ids 1..num_masks pick one mask per pixel, so mask exclusivity holds by
/// construction.
struct MaskSet2D {
  Eigen::MatrixXi ids;  // height x width
  int num_masks = 0;

  Eigen::Index height() const { return ids.rows(); }
  Eigen::Index width() const { return ids.cols(); }
};

/// Checks id range and that the ids 1..num_masks are contiguous.
void validate_mask2d(const MaskSet2D& masks, const std::string& context);

/// One view's masks lifted onto the cloud: one row per 2D mask, one column
/// per point. Columns of invisible points are all false; every column has at
/// most one true entry.
struct MaskSet3DView {
  BoolMatrix membership;  // num_masks x num_points

  Eigen::Index mask_count() const { return membership.rows(); }
  Eigen::Index point_count() const { return membership.cols(); }
};

struct MaskProvenance {
  Eigen::Index view = 0;  // position in the merge input list
  int mask2d_id = 0;      // 1-based id within that view
};

/// Fused, class-agnostic object regions. Rows are point-disjoint and
/// nonempty; provenance lists the (view, 2D mask id) pairs each row absorbed.
struct MaskSet3D {
  BoolMatrix membership;  // mask_count x num_points
  std::vector<std::vector<MaskProvenance>> provenance;

  Eigen::Index mask_count() const { return membership.rows(); }
  Eigen::Index point_count() const { return membership.cols(); }
};

/// Evenly spaced view indices: round(j*(L-1)/(target-1)) for j = 0..target-1,
/// deduplicated with order preserved. target >= L returns every index;
/// target == 1 returns the middle view.
std::vector<Eigen::Index> sample_views(Eigen::Index view_count, int target);

/// Column i becomes the one-hot of the 2D mask under pixel (u_i, v_i) when
/// the link is valid and the pixel is segmented, and stays all-false
/// otherwise.
MaskSet3DView backproject_masks(const MaskSet2D& masks, const LinkMatrix& link);

/// Sequential fusion over views. The accumulator starts from the first
/// view's nonempty masks; each later mask is unioned into the accumulated
/// mask it overlaps most (overlap = |intersection| / min size, strict >
/// threshold, ties to the lowest index) or appended as new. Afterwards each
/// multiply-claimed point goes to the largest claiming mask and empty masks
/// are dropped.
MaskSet3D merge_mask_sets(const std::vector<MaskSet3DView>& view_sets,
                          double overlap_threshold);

/// mask3d.bin: two little-endian uint64 (mask count, point count) followed by
/// one LSB-first bitmap of ceil(N/8) bytes per mask row.
void save_mask_set(const MaskSet3D& masks, const std::filesystem::path& path);
MaskSet3D load_mask_set(const std::filesystem::path& path);

/// mask3d.prov.json: per-mask size and absorbed (view, 2D mask id) pairs.
void save_mask_provenance(const MaskSet3D& masks,
                          const std::filesystem::path& path);

}  // namespace masklift
