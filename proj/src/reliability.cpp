#include "masklift/reliability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <utility>

#include <Eigen/Geometry>

namespace masklift {

AugmentParams sample_augment_params(const AugmentRanges& ranges, Rng& rng) {
  if (ranges.rotation_max < 0 || ranges.translation_max < 0 ||
      ranges.jitter_sigma < 0) {
    fail("sample_augment_params: negative range");
  }
  if (ranges.scale_lo > ranges.scale_hi || ranges.scale_lo < 0.5 ||
      ranges.scale_hi > 2.0) {
    fail("sample_augment_params: scale range must lie within [0.5, 2.0]");
  }
  AugmentParams params;
  for (int axis = 0; axis < 3; ++axis) {
    params.rotation[axis] =
        rng.uniform(-ranges.rotation_max, ranges.rotation_max);
  }
  for (int axis = 0; axis < 3; ++axis) {
    params.scale[axis] = rng.uniform(ranges.scale_lo, ranges.scale_hi);
  }
  for (int axis = 0; axis < 3; ++axis) {
    params.translation[axis] =
        rng.uniform(-ranges.translation_max, ranges.translation_max);
  }
  params.jitter_sigma = ranges.jitter_sigma;
  return params;
}

PointCloud affine_augment(const PointCloud& cloud, const AugmentParams& params,
                          std::uint64_t jitter_seed) {
  validate_cloud(cloud, "affine_augment");
  for (int axis = 0; axis < 3; ++axis) {
    if (!(params.scale[axis] >= 0.5 && params.scale[axis] <= 2.0)) {
      fail("affine_augment: scale component " + std::to_string(axis) +
           " outside [0.5, 2.0]");
    }
  }
  if (!(params.jitter_sigma >= 0) || !std::isfinite(params.jitter_sigma)) {
    fail("affine_augment: jitter_sigma must be finite and non-negative");
  }
  const Mat3 rotation =
      (Eigen::AngleAxisd(params.rotation[2], Vec3::UnitZ()) *
       Eigen::AngleAxisd(params.rotation[1], Vec3::UnitY()) *
       Eigen::AngleAxisd(params.rotation[0], Vec3::UnitX()))
          .toRotationMatrix();
  const Mat3 linear = params.scale.asDiagonal() * rotation;

  PointCloud out;
  out.positions = cloud.positions * linear.transpose();
  out.positions.rowwise() += params.translation.transpose();
  if (params.jitter_sigma > 0) {
    Rng rng(jitter_seed);
    for (Eigen::Index i = 0; i < out.positions.rows(); ++i) {
      for (int axis = 0; axis < 3; ++axis) {
        out.positions(i, axis) += rng.normal(0.0, params.jitter_sigma);
      }
    }
  }
  out.colors = cloud.colors;
  return out;
}

void validate_stack(const PredictionStack& stack, const std::string& context) {
  if (stack.probs.empty()) {
    fail(context + ": stack has no slices");
  }
  const Eigen::Index n = stack.point_count();
  const Eigen::Index c = stack.class_count();
  for (std::size_t s = 0; s < stack.probs.size(); ++s) {
    const Eigen::MatrixXd& slice = stack.probs[s];
    if (slice.rows() != n || slice.cols() != c) {
      fail(context + ": slice " + std::to_string(s) + " is " +
           std::to_string(slice.rows()) + "x" + std::to_string(slice.cols()) +
           ", expected " + std::to_string(n) + "x" + std::to_string(c));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0;
      for (Eigen::Index j = 0; j < c; ++j) {
        const double p = slice(i, j);
        if (!(p >= 0) || !std::isfinite(p)) {
          fail(context + ": slice " + std::to_string(s) + " row " +
               std::to_string(i) + " has invalid probability");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        fail(context + ": slice " + std::to_string(s) + " row " +
             std::to_string(i) + " sums to " + std::to_string(sum));
      }
    }
  }
}

Eigen::MatrixXd knn_soft_predict(const PointCloud& cloud,
                                 const LabelArray& seeds, int num_classes,
                                 int k, double temperature) {
  validate_cloud(cloud, "knn_soft_predict");
  validate_labels(seeds, num_classes, cloud.size(), "knn_soft_predict: seeds");
  if (k < 1) {
    fail("knn_soft_predict: k must be at least 1");
  }
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    fail("knn_soft_predict: temperature must be positive and finite");
  }

  std::vector<Eigen::Index> seed_indices;
  for (Eigen::Index i = 0; i < seeds.size(); ++i) {
    if (seeds[i] != kIgnoreLabel) {
      seed_indices.push_back(i);
    }
  }
  if (seed_indices.empty()) {
    fail("knn_soft_predict: no seed labels");
  }
  const std::size_t seed_count = seed_indices.size();
  const std::size_t k_eff = std::min<std::size_t>(
      static_cast<std::size_t>(k), seed_count);

  PointMatrix seed_positions(static_cast<Eigen::Index>(seed_count), 3);
  for (std::size_t s = 0; s < seed_count; ++s) {
    seed_positions.row(static_cast<Eigen::Index>(s)) =
        cloud.positions.row(seed_indices[s]);
  }

  const Eigen::Index n = cloud.size();
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, num_classes);
  std::vector<std::pair<double, std::size_t>> candidates(seed_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVector3d point = cloud.positions.row(i);
    for (std::size_t s = 0; s < seed_count; ++s) {
      const double dist =
          (seed_positions.row(static_cast<Eigen::Index>(s)) - point).norm();
      candidates[s] = {dist, s};
    }
    std::nth_element(candidates.begin(),
                     candidates.begin() + static_cast<std::ptrdiff_t>(k_eff - 1),
                     candidates.end());
    std::sort(candidates.begin(),
              candidates.begin() + static_cast<std::ptrdiff_t>(k_eff));

    if (candidates.front().first == 0.0) {
      int best_class = num_classes;
      for (const auto& [dist, s] : candidates) {
        if (dist > 0.0) {
          break;
        }
        best_class = std::min(best_class, seeds[seed_indices[s]]);
      }
      // Coincident seeds beyond the k-th candidate also sit at distance 0;
      // scan the tail so the chosen class does not depend on k.
      for (std::size_t s = k_eff; s < seed_count; ++s) {
        if (candidates[s].first == 0.0) {
          best_class =
              std::min(best_class, seeds[seed_indices[candidates[s].second]]);
        }
      }
      probs(i, best_class) = 1.0;
      continue;
    }

    double total = 0;
    for (std::size_t s = 0; s < k_eff; ++s) {
      const auto& [dist, seed] = candidates[s];
      const double weight = std::exp(-dist / temperature);
      probs(i, seeds[seed_indices[seed]]) += weight;
      total += weight;
    }
    if (total <= 0) {
      // All k neighbors so far away that every weight underflowed; fall back
      // to the single nearest seed.
      probs.row(i).setZero();
      probs(i, seeds[seed_indices[candidates.front().second]]) = 1.0;
    } else {
      probs.row(i) /= total;
    }
  }
  return probs;
}

PredictionStack build_stack(const PointCloud& cloud, const LabelArray& seeds,
                            int num_classes, int k_augment,
                            std::uint64_t aug_seed,
                            const AugmentRanges& ranges,
                            const KnnConfig& knn) {
  if (k_augment < 1) {
    fail("build_stack: k_augment must be at least 1");
  }
  PredictionStack stack;
  stack.probs.reserve(static_cast<std::size_t>(k_augment) + 1);
  stack.probs.push_back(
      knn_soft_predict(cloud, seeds, num_classes, knn.k, knn.temperature));
  Rng rng(aug_seed);
  for (int j = 0; j < k_augment; ++j) {
    const AugmentParams params = sample_augment_params(ranges, rng);
    const std::uint64_t jitter_seed = rng.raw();
    const PointCloud augmented = affine_augment(cloud, params, jitter_seed);
    stack.probs.push_back(knn_soft_predict(augmented, seeds, num_classes,
                                           knn.k, knn.temperature));
  }
  return stack;
}

ReliabilitySplit split_reliable(const PredictionStack& stack, double tau,
                                double kappa) {
  validate_stack(stack, "split_reliable");
  if (std::isnan(tau)) {
    fail("split_reliable: tau is NaN");
  }
  if (std::isnan(kappa) || kappa < 0) {
    fail("split_reliable: kappa must be non-negative");
  }
  const Eigen::Index slices = stack.slice_count();
  const Eigen::Index n = stack.point_count();
  const Eigen::Index c = stack.class_count();

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, c);
  for (const Eigen::MatrixXd& slice : stack.probs) {
    mean += slice;
  }
  mean /= static_cast<double>(slices);

  Eigen::MatrixXd variance = Eigen::MatrixXd::Zero(n, c);
  for (const Eigen::MatrixXd& slice : stack.probs) {
    variance += (slice - mean).cwiseAbs2();
  }
  variance /= static_cast<double>(slices);

  ReliabilitySplit split;
  split.reliable = BoolArray::Constant(n, false);
  split.hard = LabelArray::Constant(n, kIgnoreLabel);
  split.soft = Eigen::MatrixXd(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool reliable = false;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (mean(i, j) >= tau && variance(i, j) <= kappa) {
        reliable = true;
        break;
      }
    }
    split.reliable[i] = reliable;
    if (reliable) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < c; ++j) {
        if (mean(i, j) > mean(i, best)) {
          best = j;
        }
      }
      split.hard[i] = static_cast<int>(best);
    }
    split.soft.row(i) = mean.row(i) / mean.row(i).sum();
  }
  return split;
}

namespace {

void write_u64_le(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64_le(std::istream& in, const std::string& context) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    fail(context + ": truncated header");
  }
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void save_stack(const PredictionStack& stack,
                const std::filesystem::path& path) {
  validate_stack(stack, "save_stack: " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail("save_stack: cannot open " + path.string() + " for writing");
  }
  write_u64_le(out, static_cast<std::uint64_t>(stack.slice_count()));
  write_u64_le(out, static_cast<std::uint64_t>(stack.point_count()));
  write_u64_le(out, static_cast<std::uint64_t>(stack.class_count()));
  for (const Eigen::MatrixXd& slice : stack.probs) {
    for (Eigen::Index i = 0; i < slice.rows(); ++i) {
      for (Eigen::Index j = 0; j < slice.cols(); ++j) {
        write_u64_le(out, std::bit_cast<std::uint64_t>(slice(i, j)));
      }
    }
  }
  if (!out) {
    fail("save_stack: write to " + path.string() + " failed");
  }
}

PredictionStack load_stack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail("load_stack: cannot open " + path.string());
  }
  const std::string context = "load_stack: " + path.string();
  const auto slices = static_cast<Eigen::Index>(read_u64_le(in, context));
  const auto n = static_cast<Eigen::Index>(read_u64_le(in, context));
  const auto c = static_cast<Eigen::Index>(read_u64_le(in, context));
  if (slices < 1 || n < 0 || c < 1) {
    fail(context + ": invalid header (" + std::to_string(slices) + ", " +
         std::to_string(n) + ", " + std::to_string(c) + ")");
  }
  PredictionStack stack;
  stack.probs.assign(static_cast<std::size_t>(slices), Eigen::MatrixXd(n, c));
  for (Eigen::Index s = 0; s < slices; ++s) {
    Eigen::MatrixXd& slice = stack.probs[static_cast<std::size_t>(s)];
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
          fail(context + ": truncated at slice " + std::to_string(s) +
               " row " + std::to_string(i));
        }
        std::uint64_t raw = 0;
        for (int b = 0; b < 8; ++b) {
          raw |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        }
        slice(i, j) = std::bit_cast<double>(raw);
      }
    }
  }
  validate_stack(stack, context);
  return stack;
}

}  // namespace masklift
