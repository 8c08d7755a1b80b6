#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "masklift/core.hpp"
#include "masklift/rng.hpp"

namespace masklift {

/// Sampling ranges for random affine augmentations. Rotation angles are
/// uniform in [-rotation_max, rotation_max] per axis, scale per axis in
/// [scale_lo, scale_hi], translation per axis in [-translation_max,
/// translation_max]; jitter_sigma is passed through unchanged.
struct AugmentRanges {
  double rotation_max = 10.0 * std::numbers::pi / 180.0;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double translation_max = 0.1;
  double jitter_sigma = 0.005;
};

struct AugmentParams {
  Vec3 rotation = Vec3::Zero();  // Euler angles (x, y, z), radians
  Vec3 scale = Vec3::Ones();     // per-axis, each in [0.5, 2.0]
  Vec3 translation = Vec3::Zero();
  double jitter_sigma = 0.0;  // stddev of per-point Gaussian noise, meters
};

AugmentParams sample_augment_params(const AugmentRanges& ranges, Rng& rng);

/// positions' = diag(scale) * Rz * Ry * Rx * x + translation + noise, with
/// noise drawn per point from Normal(0, jitter_sigma^2) using jitter_seed
/// (no draws when jitter_sigma is 0). Colors pass through.
PointCloud affine_augment(const PointCloud& cloud, const AugmentParams& params,
                          std::uint64_t jitter_seed);

/// Class-probability tensors from the original input (slice 0) and its K
/// augmented counterparts (slices 1..K), aligned per point.
struct PredictionStack {
  std::vector<Eigen::MatrixXd> probs;  // each N x C

  Eigen::Index slice_count() const {
    return static_cast<Eigen::Index>(probs.size());
  }
  Eigen::Index point_count() const {
    return probs.empty() ? 0 : probs.front().rows();
  }
  Eigen::Index class_count() const {
    return probs.empty() ? 0 : probs.front().cols();
  }
};

/// Checks slice shapes agree and every row is a distribution (entries >= 0,
/// sum within 1e-6 of 1).
void validate_stack(const PredictionStack& stack, const std::string& context);

/// Stand-in predictor: soft labels from the k nearest seed-labeled points.
/// Class scores are sums of exp(-distance / temperature) over those
/// neighbors, normalized per point. Neighbor ties break by seed index; a
/// point at distance zero from a seed gets that seed's one-hot (smallest
/// class id if several seeds coincide there). k is clamped to the number of
/// seeds.
Eigen::MatrixXd knn_soft_predict(const PointCloud& cloud,
                                 const LabelArray& seeds, int num_classes,
                                 int k, double temperature);

struct KnnConfig {
  int k = 8;
  double temperature = 0.25;
};

/// Slice 0 = knn_soft_predict on the original cloud; slice j = the same
/// predictor on the j-th augmented cloud. Augmentation parameters and jitter
/// seeds all derive from aug_seed.
PredictionStack build_stack(const PointCloud& cloud, const LabelArray& seeds,
                            int num_classes, int k_augment,
                            std::uint64_t aug_seed,
                            const AugmentRanges& ranges, const KnnConfig& knn);

/// Per-point reliable/ambiguous partition. hard[i] is the argmax of the mean
/// prediction where reliable[i], kIgnoreLabel elsewhere; soft rows are the
/// normalized mean prediction, meaningful where ambiguous.
struct ReliabilitySplit {
  BoolArray reliable;
  LabelArray hard;
  Eigen::MatrixXd soft;  // N x C
};

/// A point is reliable iff some class has mean probability >= tau and
/// population variance <= kappa across the stack's slices. Argmax ties go to
/// the smallest class id.
ReliabilitySplit split_reliable(const PredictionStack& stack, double tau,
                                double kappa);

/// stack file: three little-endian uint64 (slice count, N, C), then slice
/// after slice of row-major little-endian IEEE doubles.
void save_stack(const PredictionStack& stack,
                const std::filesystem::path& path);
PredictionStack load_stack(const std::filesystem::path& path);

}  // namespace masklift
