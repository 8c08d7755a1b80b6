#include "masklift/eval.hpp"

#include <limits>

namespace masklift {

ConfusionMatrix confusion_matrix(const LabelArray& gt, const LabelArray& pred,
                                 int num_classes) {
  if (gt.size() != pred.size()) {
    fail("confusion_matrix: ground truth has " + std::to_string(gt.size()) +
         " entries but prediction has " + std::to_string(pred.size()));
  }
  validate_labels(gt, num_classes, gt.size(), "confusion_matrix: ground truth");
  validate_labels(pred, num_classes, pred.size(),
                  "confusion_matrix: prediction");
  ConfusionMatrix counts = ConfusionMatrix::Zero(num_classes, num_classes);
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel || pred[i] == kIgnoreLabel) {
      continue;
    }
    ++counts(gt[i], pred[i]);
  }
  return counts;
}

IoUReport miou(const LabelArray& pred, const LabelArray& gt, int num_classes) {
  const ConfusionMatrix counts = confusion_matrix(gt, pred, num_classes);
  IoUReport report;
  report.evaluated_points = counts.sum();
  if (report.evaluated_points == 0) {
    fail("miou: no point has both a prediction and a ground truth label");
  }
  report.per_class.resize(num_classes);
  double total = 0;
  Eigen::Index included = 0;
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t tp = counts(c, c);
    const std::int64_t fp = counts.col(c).sum() - tp;
    const std::int64_t fn = counts.row(c).sum() - tp;
    const std::int64_t uni = tp + fp + fn;
    if (uni == 0) {
      report.per_class[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    report.per_class[c] =
        static_cast<double>(tp) / static_cast<double>(uni);
    total += report.per_class[c];
    ++included;
  }
  report.mean = total / static_cast<double>(included);
  return report;
}

LabelStats label_stats(const LabelArray& labels, const LabelArray& gt) {
  if (labels.size() != gt.size()) {
    fail("label_stats: labels have " + std::to_string(labels.size()) +
         " entries but ground truth has " + std::to_string(gt.size()));
  }
  LabelStats stats;
  Eigen::Index compared = 0;
  Eigen::Index matching = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) {
      continue;
    }
    ++stats.count;
    if (gt[i] == kIgnoreLabel) {
      continue;
    }
    ++compared;
    if (labels[i] == gt[i]) {
      ++matching;
    }
  }
  if (compared > 0) {
    stats.accuracy =
        static_cast<double>(matching) / static_cast<double>(compared);
  }
  return stats;
}

}  // namespace masklift
