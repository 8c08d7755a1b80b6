#include "masklift/labels.hpp"

#include <map>
#include <vector>

namespace masklift {

namespace {

/// Mode over the non-ignore labels at the given indices; ties go to the
/// smallest class id. Returns kIgnoreLabel when nothing is labeled, with
/// *mode_count = 0.
int labeled_mode(const LabelArray& labels,
                 const std::vector<Eigen::Index>& indices,
                 Eigen::Index* mode_count) {
  std::map<int, Eigen::Index> counts;
  for (const Eigen::Index i : indices) {
    if (labels[i] != kIgnoreLabel) {
      ++counts[labels[i]];
    }
  }
  int mode = kIgnoreLabel;
  Eigen::Index best = 0;
  for (const auto& [label, count] : counts) {
    if (count > best) {
      best = count;
      mode = label;
    }
  }
  *mode_count = best;
  return mode;
}

std::vector<std::vector<Eigen::Index>> disjoint_mask_indices(
    const MaskSet3D& masks, const std::string& who) {
  const Eigen::Index n = masks.point_count();
  std::vector<std::vector<Eigen::Index>> indices(
      static_cast<std::size_t>(masks.mask_count()));
  BoolArray claimed = BoolArray::Constant(n, false);
  for (Eigen::Index t = 0; t < masks.mask_count(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!masks.membership(t, i)) {
        continue;
      }
      if (claimed[i]) {
        fail(who + ": masks are not point-disjoint, point " +
             std::to_string(i) + " is claimed twice (mask " +
             std::to_string(t) + ")");
      }
      claimed[i] = true;
      indices[static_cast<std::size_t>(t)].push_back(i);
    }
  }
  return indices;
}

}  // namespace

LabelArray init_labels(const LabelArray& y, const MaskSet3D& masks) {
  if (y.size() != masks.point_count() && masks.mask_count() > 0) {
    fail("init_labels: labels have " + std::to_string(y.size()) +
         " entries but masks cover " + std::to_string(masks.point_count()) +
         " points");
  }
  const auto mask_indices = disjoint_mask_indices(masks, "init_labels");
  LabelArray out = y;
  for (const std::vector<Eigen::Index>& indices : mask_indices) {
    Eigen::Index mode_count = 0;
    const int mode = labeled_mode(y, indices, &mode_count);
    if (mode == kIgnoreLabel) {
      continue;
    }
    for (const Eigen::Index i : indices) {
      out[i] = mode;
    }
  }
  return out;
}

LabelArray propagate(const LabelArray& y, const LabelArray& yr,
                     const MaskSet3D& masks, const PropagationConfig& cfg,
                     PropagateStats* stats) {
  if (y.size() != yr.size()) {
    fail("propagate: y has " + std::to_string(y.size()) +
         " entries but yr has " + std::to_string(yr.size()));
  }
  if (y.size() != masks.point_count() && masks.mask_count() > 0) {
    fail("propagate: labels have " + std::to_string(y.size()) +
         " entries but masks cover " + std::to_string(masks.point_count()) +
         " points");
  }
  if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) {
    fail("propagate: eta must lie in [0, 1]");
  }
  const auto mask_indices = disjoint_mask_indices(masks, "propagate");

  LabelArray out = LabelArray::Constant(y.size(), kIgnoreLabel);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != kIgnoreLabel) {
      out[i] = y[i];
    }
  }
  PropagateStats local;
  for (const std::vector<Eigen::Index>& indices : mask_indices) {
    Eigen::Index reliable_count = 0;
    const int reliable_mode = labeled_mode(yr, indices, &reliable_count);
    const double share = indices.empty()
                             ? 0.0
                             : static_cast<double>(reliable_count) /
                                   static_cast<double>(indices.size());
    if (reliable_mode != kIgnoreLabel && share > cfg.eta) {
      for (const Eigen::Index i : indices) {
        out[i] = reliable_mode;
      }
      ++local.reliable_branch_masks;
      continue;
    }
    Eigen::Index annotated_count = 0;
    const int annotated_mode = labeled_mode(y, indices, &annotated_count);
    if (annotated_mode != kIgnoreLabel) {
      for (const Eigen::Index i : indices) {
        out[i] = annotated_mode;
      }
      ++local.annotation_branch_masks;
    } else {
      ++local.untouched_masks;
    }
  }
  if (stats != nullptr) {
    *stats = local;
  }
  return out;
}

}  // namespace masklift
