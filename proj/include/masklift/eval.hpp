#pragma once

#include <cstdint>

#include "masklift/core.hpp"

namespace masklift {

using ConfusionMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// C x C counts, rows = ground truth, columns = prediction. Only points
/// where both labels are non-ignore are counted, so the metric scores
/// committed predictions only.
ConfusionMatrix confusion_matrix(const LabelArray& gt, const LabelArray& pred,
                                 int num_classes);

struct IoUReport {
  /// Per-class intersection over union; NaN for classes absent from both
  /// ground truth and prediction (excluded from the mean).
  Eigen::VectorXd per_class;
  double mean = 0;
  Eigen::Index evaluated_points = 0;
};

/// IoU_c = TP / (TP + FP + FN) from the confusion matrix; the mean skips
/// zero-union classes. Errors when no point has both labels.
IoUReport miou(const LabelArray& pred, const LabelArray& gt, int num_classes);

struct LabelStats {
  Eigen::Index count = 0;  // non-ignore entries in the label array
  /// Fraction matching ground truth among points where both the labels and
  /// the ground truth are non-ignore; vacuously 1 when no such point exists.
  double accuracy = 1.0;
};

LabelStats label_stats(const LabelArray& labels, const LabelArray& gt);

}  // namespace masklift
