#include "masklift/losses.hpp"

#include <algorithm>
#include <cmath>

namespace masklift {

namespace {

double floored(double p) { return std::max(p, kProbFloor); }

void check_rows(const LabelArray& labels, const Eigen::MatrixXd& p,
                const std::string& who) {
  if (labels.size() != p.rows()) {
    fail(who + ": " + std::to_string(labels.size()) + " labels for " +
         std::to_string(p.rows()) + " prediction rows");
  }
  const int c = static_cast<int>(p.cols());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != kIgnoreLabel && (labels[i] < 0 || labels[i] >= c)) {
      fail(who + ": label " + std::to_string(labels[i]) + " at point " +
           std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
  }
}

}  // namespace

LossValue ce(const LabelArray& labels, const Eigen::MatrixXd& p) {
  check_rows(labels, p, "ce");
  const Eigen::Index count = count_labeled(labels);
  if (count == 0) {
    fail("ce: no labeled points");
  }
  LossValue out;
  out.gradient = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  double sum = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) {
      continue;
    }
    const double py = floored(p(i, labels[i]));
    sum += -std::log(py);
    out.gradient(i, labels[i]) = -1.0 / (static_cast<double>(count) * py);
  }
  out.value = sum / static_cast<double>(count);
  return out;
}

LossValue kl(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p,
             const BoolArray& select) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) {
    fail("kl: target is " + std::to_string(q.rows()) + "x" +
         std::to_string(q.cols()) + " but prediction is " +
         std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
  }
  if (select.size() != p.rows()) {
    fail("kl: selection mask has " + std::to_string(select.size()) +
         " entries for " + std::to_string(p.rows()) + " rows");
  }
  const Eigen::Index count = select.count();
  if (count == 0) {
    fail("kl: empty selection");
  }
  LossValue out;
  out.gradient = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  double sum = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!select[i]) {
      continue;
    }
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double qv = q(i, j);
      if (qv <= 0) {
        continue;
      }
      const double pv = floored(p(i, j));
      sum += qv * (std::log(qv) - std::log(pv));
      out.gradient(i, j) = -qv / (static_cast<double>(count) * pv);
    }
  }
  out.value = sum / static_cast<double>(count);
  return out;
}

LossValue nce(const LabelArray& labels, const Eigen::MatrixXd& p) {
  check_rows(labels, p, "nce");
  const Eigen::Index count = count_labeled(labels);
  if (count == 0) {
    fail("nce: no labeled points");
  }
  LossValue out;
  out.gradient = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  double sum = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) {
      continue;
    }
    double denominator = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      denominator += -std::log(floored(p(i, j)));
    }
    if (denominator <= 0) {
      fail("nce: degenerate row " + std::to_string(i) +
           " (every class at probability 1)");
    }
    const double numerator = -std::log(floored(p(i, labels[i])));
    sum += numerator / denominator;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double indicator = (j == labels[i]) ? 1.0 : 0.0;
      out.gradient(i, j) = (numerator - indicator * denominator) /
                           (floored(p(i, j)) * denominator * denominator *
                            static_cast<double>(count));
    }
  }
  out.value = sum / static_cast<double>(count);
  return out;
}

LossValue rce(const LabelArray& labels, const Eigen::MatrixXd& p, double a) {
  check_rows(labels, p, "rce");
  if (!std::isfinite(a) || a >= 0) {
    fail("rce: the log-zero constant must be finite and negative");
  }
  const Eigen::Index count = count_labeled(labels);
  if (count == 0) {
    fail("rce: no labeled points");
  }
  LossValue out;
  out.gradient = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  double sum = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) {
      continue;
    }
    double off_label = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (j == labels[i]) {
        continue;
      }
      off_label += p(i, j);
      out.gradient(i, j) = -a / static_cast<double>(count);
    }
    sum += -a * off_label;
  }
  out.value = sum / static_cast<double>(count);
  return out;
}

SliceLosses loss_r(const LabelArray& yr_hard, const PredictionStack& stack,
                   const BoolArray& reliable) {
  validate_stack(stack, "loss_r");
  const Eigen::Index n = stack.point_count();
  if (yr_hard.size() != n || reliable.size() != n) {
    fail("loss_r: labels, reliability mask, and stack disagree on size");
  }
  LabelArray restricted(n);
  Eigen::Index labeled = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    restricted[i] =
        (reliable[i] && yr_hard[i] != kIgnoreLabel) ? yr_hard[i] : kIgnoreLabel;
    if (restricted[i] != kIgnoreLabel) {
      ++labeled;
    }
  }
  SliceLosses out;
  const auto k = static_cast<std::size_t>(stack.slice_count() - 1);
  if (labeled == 0) {
    out.slice_gradients.assign(
        k, Eigen::MatrixXd::Zero(n, stack.class_count()));
    return out;
  }
  out.slice_gradients.reserve(k);
  for (std::size_t j = 1; j < stack.probs.size(); ++j) {
    LossValue term = ce(restricted, stack.probs[j]);
    out.value += term.value;
    out.slice_gradients.push_back(std::move(term.gradient));
  }
  return out;
}

SliceLosses loss_a(const Eigen::MatrixXd& soft, const PredictionStack& stack,
                   const BoolArray& reliable) {
  validate_stack(stack, "loss_a");
  const Eigen::Index n = stack.point_count();
  if (soft.rows() != n || reliable.size() != n) {
    fail("loss_a: soft labels, reliability mask, and stack disagree on size");
  }
  const BoolArray ambiguous = !reliable;
  SliceLosses out;
  const auto k = static_cast<std::size_t>(stack.slice_count() - 1);
  if (ambiguous.count() == 0) {
    out.slice_gradients.assign(
        k, Eigen::MatrixXd::Zero(n, stack.class_count()));
    return out;
  }
  out.slice_gradients.reserve(k);
  for (std::size_t j = 1; j < stack.probs.size(); ++j) {
    LossValue term = kl(soft, stack.probs[j], ambiguous);
    out.value += term.value;
    out.slice_gradients.push_back(std::move(term.gradient));
  }
  return out;
}

LossValue loss_m(const LabelArray& ytilde, const Eigen::MatrixXd& p,
                 double a) {
  check_rows(ytilde, p, "loss_m");
  if (count_labeled(ytilde) == 0) {
    LossValue out;
    out.gradient = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    return out;
  }
  const LossValue n = nce(ytilde, p);
  const LossValue r = rce(ytilde, p, a);
  LossValue out;
  out.value = n.value + r.value;
  out.gradient = n.gradient + r.gradient;
  return out;
}

LossReport total_loss(const LabelArray& y, const LabelArray& ytilde,
                      const ReliabilitySplit& split,
                      const PredictionStack& stack,
                      const LossWeights& weights) {
  validate_stack(stack, "total_loss");
  const Eigen::Index n = stack.point_count();
  if (y.size() != n || ytilde.size() != n || split.reliable.size() != n ||
      split.hard.size() != n || split.soft.rows() != n) {
    fail("total_loss: inputs disagree on point count");
  }
  for (const double w : {weights.seg, weights.r, weights.a, weights.m}) {
    if (!(w >= 0) || !std::isfinite(w)) {
      fail("total_loss: loss weights must be finite and non-negative");
    }
  }
  const Eigen::MatrixXd& slice0 = stack.probs.front();

  const LossValue seg = ce(y, slice0);
  const SliceLosses r = loss_r(split.hard, stack, split.reliable);
  const SliceLosses a = loss_a(split.soft, stack, split.reliable);
  const LossValue m = loss_m(ytilde, slice0);

  LossReport report;
  report.seg_term = seg.value;
  report.r_term = r.value;
  report.a_term = a.value;
  report.m_term = m.value;
  report.value = weights.seg * seg.value + weights.r * r.value +
                 weights.a * a.value + weights.m * m.value;
  report.gradient = weights.seg * seg.gradient + weights.m * m.gradient;
  report.labeled_y = count_labeled(y);
  report.reliable_points = split.reliable.count();
  report.ambiguous_points = n - report.reliable_points;
  report.labeled_ytilde = count_labeled(ytilde);
  return report;
}

}  // namespace masklift
