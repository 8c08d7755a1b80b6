#pragma once

#include "masklift/core.hpp"
#include "masklift/lift.hpp"

namespace masklift {

struct PropagationConfig {
  double eta = 0.7;  // proportion of the mask the reliable label must reach
};

/// How each mask was handled by propagate, for sweep reports.
struct PropagateStats {
  Eigen::Index reliable_branch_masks = 0;
  Eigen::Index annotation_branch_masks = 0;
  Eigen::Index untouched_masks = 0;
};

/// Expands annotations onto masks: every mask containing at least one
/// non-ignore entry of y is filled with the mode of those entries (ties to
/// the smallest class id). Points outside masks, and masks without
/// annotations, keep their y value. Requires point-disjoint masks.
LabelArray init_labels(const LabelArray& y, const MaskSet3D& masks);

/// Fuses annotations with reliable pseudo labels mask by mask. The output
/// starts as y. For each mask: let label_m be the mode of the non-ignore
/// entries of yr inside it; if count(yr == label_m) / mask size exceeds eta
/// (strictly), the whole mask takes label_m; otherwise, if y has annotations
/// inside the mask, the whole mask takes their mode. Mode ties go to the
/// smallest class id. Requires point-disjoint masks.
LabelArray propagate(const LabelArray& y, const LabelArray& yr,
                     const MaskSet3D& masks, const PropagationConfig& cfg,
                     PropagateStats* stats = nullptr);

}  // namespace masklift
