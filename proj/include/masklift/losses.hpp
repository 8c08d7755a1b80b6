#pragma once

#include <vector>

#include "masklift/core.hpp"
#include "masklift/reliability.hpp"

namespace masklift {

/// Floor applied to probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Stand-in for log 0 in the reverse cross-entropy's one-hot target.
inline constexpr double kRceLogZero = -4.0;

/// A scalar loss with its gradient with respect to the prediction matrix it
/// was evaluated on.
struct LossValue {
  double value = 0;
  Eigen::MatrixXd gradient;  // N x C
};

/// Mean over labeled points of -log P[i, y_i].
LossValue ce(const LabelArray& labels, const Eigen::MatrixXd& p);

/// Mean over selected points of sum_c Q log(Q / P); Q is a constant target
/// (no gradient flows into it).
LossValue kl(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p,
             const BoolArray& select);

/// Mean over labeled points of (-log P[i, y_i]) / (-sum_j log P[i, j]).
LossValue nce(const LabelArray& labels, const Eigen::MatrixXd& p);

/// Mean over labeled points of -a * sum_{k != y_i} P[i, k], the reverse
/// cross-entropy against a one-hot target with log 0 := a.
LossValue rce(const LabelArray& labels, const Eigen::MatrixXd& p,
              double a = kRceLogZero);

/// A loss summed over the stack's augmented slices (1..K), with one gradient
/// per augmented slice. The sum is not averaged over K.
struct SliceLosses {
  double value = 0;
  std::vector<Eigen::MatrixXd> slice_gradients;  // K entries, each N x C
};

/// Sum over augmented slices of ce against the hard pseudo labels restricted
/// to reliable points. An empty reliable set gives 0, not an error.
SliceLosses loss_r(const LabelArray& yr_hard, const PredictionStack& stack,
                   const BoolArray& reliable);

/// Sum over augmented slices of kl against the soft pseudo labels on the
/// ambiguous (not reliable) points. No ambiguous points gives 0.
SliceLosses loss_a(const Eigen::MatrixXd& soft, const PredictionStack& stack,
                   const BoolArray& reliable);

/// nce + rce on the expanded labels; 0 when nothing is labeled.
LossValue loss_m(const LabelArray& ytilde, const Eigen::MatrixXd& p,
                 double a = kRceLogZero);

struct LossWeights {
  double seg = 1.0;
  double r = 1.0;
  double a = 1.0;
  double m = 1.0;
};

struct LossReport {
  double value = 0;
  double seg_term = 0;
  double r_term = 0;
  double a_term = 0;
  double m_term = 0;
  /// Gradient of the weighted total with respect to slice 0 (the original
  /// input's prediction). loss_r and loss_a touch only augmented slices, so
  /// they contribute nothing here.
  Eigen::MatrixXd gradient;
  Eigen::Index labeled_y = 0;
  Eigen::Index reliable_points = 0;
  Eigen::Index ambiguous_points = 0;
  Eigen::Index labeled_ytilde = 0;
};

/// weights.seg * ce(y, slice0) + weights.r * loss_r + weights.a * loss_a +
/// weights.m * loss_m(ytilde, slice0).
LossReport total_loss(const LabelArray& y, const LabelArray& ytilde,
                      const ReliabilitySplit& split,
                      const PredictionStack& stack, const LossWeights& weights);

}  // namespace masklift
