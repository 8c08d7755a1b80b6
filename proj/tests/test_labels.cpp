#include <doctest.h>

#include <vector>

#include "masklift/core.hpp"
#include "masklift/labels.hpp"
#include "masklift/rng.hpp"
#include "support/oracles.hpp"

using namespace masklift;

namespace {

MaskSet3D mask_set(Eigen::Index n,
                   const std::vector<std::vector<Eigen::Index>>& rows) {
  MaskSet3D masks;
  masks.membership =
      BoolMatrix::Constant(static_cast<Eigen::Index>(rows.size()), n, false);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const Eigen::Index i : rows[r]) {
      masks.membership(static_cast<Eigen::Index>(r), i) = true;
    }
  }
  masks.provenance.resize(rows.size());
  return masks;
}

}  // namespace

TEST_CASE("init_labels spreads the mode over each mask") {
  const Eigen::Index n = 12;

  SUBCASE("single annotation fills its mask") {
    const auto masks = mask_set(n, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}});
    LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
    y[3] = 2;
    const LabelArray out = init_labels(y, masks);
    for (Eigen::Index i = 0; i <= 9; ++i) {
      CHECK(out[i] == 2);
    }
    CHECK(out[10] == kIgnoreLabel);
    CHECK(out[11] == kIgnoreLabel);
  }
  SUBCASE("mode of mixed annotations wins") {
    const auto masks = mask_set(n, {{0, 1, 2, 3, 4}});
    LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
    y[0] = 2;
    y[1] = 2;
    y[2] = 5;
    const LabelArray out = init_labels(y, masks);
    for (Eigen::Index i = 0; i <= 4; ++i) {
      CHECK(out[i] == 2);
    }
  }
  SUBCASE("no annotations inside masks is a no-op") {
    const auto masks = mask_set(n, {{0, 1, 2}});
    LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
    y[7] = 1;
    const LabelArray out = init_labels(y, masks);
    CHECK((out.array() == y.array()).all());
  }
  SUBCASE("mode ties break to the smallest class") {
    const auto masks = mask_set(n, {{0, 1, 2, 3}});
    LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
    y[0] = 4;
    y[1] = 1;
    const LabelArray out = init_labels(y, masks);
    CHECK(out[2] == 1);
  }
  SUBCASE("annotations outside masks survive") {
    const auto masks = mask_set(n, {{0, 1}});
    LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
    y[0] = 3;
    y[11] = 1;
    const LabelArray out = init_labels(y, masks);
    CHECK(out[1] == 3);
    CHECK(out[11] == 1);
  }
}

TEST_CASE("propagate hand cases") {
  const Eigen::Index n = 14;
  const auto masks = mask_set(n, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}});
  LabelArray y = LabelArray::Constant(n, kIgnoreLabel);
  y[2] = 1;
  LabelArray yr = LabelArray::Constant(n, kIgnoreLabel);
  for (Eigen::Index i = 0; i < 8; ++i) {
    yr[i] = 3;
  }

  SUBCASE("reliable share above eta fills the mask") {
    PropagateStats stats;
    const LabelArray out = propagate(y, yr, masks, {0.7}, &stats);
    for (Eigen::Index i = 0; i <= 9; ++i) {
      CHECK(out[i] == 3);
    }
    CHECK(out[10] == kIgnoreLabel);
    CHECK(stats.reliable_branch_masks == 1);
    CHECK(stats.annotation_branch_masks == 0);
    CHECK(stats.untouched_masks == 0);
  }
  SUBCASE("share at or below eta falls back to annotations") {
    PropagateStats stats;
    const LabelArray out = propagate(y, yr, masks, {0.9}, &stats);
    for (Eigen::Index i = 0; i <= 9; ++i) {
      CHECK(out[i] == 1);
    }
    CHECK(stats.reliable_branch_masks == 0);
    CHECK(stats.annotation_branch_masks == 1);
  }
  SUBCASE("eta exactly at the share is not enough") {
    PropagateStats stats;
    const LabelArray out = propagate(y, yr, masks, {0.8}, &stats);
    CHECK(out[0] == 1);  // 8/10 > 0.8 is false, strict inequality
    CHECK(stats.annotation_branch_masks == 1);
  }
  SUBCASE("both branches inert leaves the annotations") {
    const LabelArray empty_yr = LabelArray::Constant(n, kIgnoreLabel);
    LabelArray bare = LabelArray::Constant(n, kIgnoreLabel);
    bare[12] = 2;  // outside every mask
    PropagateStats stats;
    const LabelArray out = propagate(bare, empty_yr, masks, {0.7}, &stats);
    CHECK((out.array() == bare.array()).all());
    CHECK(stats.untouched_masks == 1);
  }
}

TEST_CASE("propagate with vacuous reliable labels reduces to init_labels") {
  Rng rng(701);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n =
        20 + static_cast<Eigen::Index>(rng.uniform_index(200));
    MaskSet3D masks;
    masks.membership = oracle::random_disjoint_masks(rng, n, 8);
    masks.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
    const LabelArray y = oracle::random_labels(rng, n, 6, 0.8);
    const LabelArray none = LabelArray::Constant(n, kIgnoreLabel);

    const LabelArray via_init = init_labels(y, masks);
    const LabelArray via_propagate = propagate(y, none, masks, {1.0});
    for (Eigen::Index i = 0; i < n; ++i) {
      if (masks.membership.col(i).any()) {
        CHECK(via_propagate[i] == via_init[i]);
      }
    }
  }
}

TEST_CASE("propagate matches the brute-force reference") {
  Rng rng(702);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n =
        10 + static_cast<Eigen::Index>(rng.uniform_index(300));
    const int c = 2 + static_cast<int>(rng.uniform_index(8));
    MaskSet3D masks;
    masks.membership = oracle::random_disjoint_masks(rng, n, 10);
    masks.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
    const LabelArray y = oracle::random_labels(rng, n, c, 0.9);
    const LabelArray yr = oracle::random_labels(rng, n, c, 0.5);
    const double eta = rng.uniform();

    const LabelArray got = propagate(y, yr, masks, {eta});
    const LabelArray want =
        oracle::propagate_reference(y, yr, masks.membership, eta);
    CHECK((got.array() == want.array()).all());
  }
}

TEST_CASE("propagate never invents labels") {
  Rng rng(703);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n =
        10 + static_cast<Eigen::Index>(rng.uniform_index(150));
    MaskSet3D masks;
    masks.membership = oracle::random_disjoint_masks(rng, n, 6);
    masks.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
    const LabelArray y = oracle::random_labels(rng, n, 5, 0.85);
    const LabelArray yr = oracle::random_labels(rng, n, 5, 0.6);
    const LabelArray out = propagate(y, yr, masks, {rng.uniform()});

    for (Eigen::Index i = 0; i < n; ++i) {
      if (out[i] == kIgnoreLabel) {
        continue;
      }
      bool allowed = false;
      if (!masks.membership.col(i).any()) {
        allowed = out[i] == y[i];
      } else {
        for (Eigen::Index t = 0; t < masks.mask_count() && !allowed; ++t) {
          if (!masks.membership(t, i)) {
            continue;
          }
          for (Eigen::Index j = 0; j < n && !allowed; ++j) {
            if (masks.membership(t, j)) {
              allowed = out[i] == y[j] || out[i] == yr[j];
            }
          }
        }
        allowed = allowed || out[i] == y[i];
      }
      CHECK(allowed);
    }
  }
}

TEST_CASE("raising eta never adds reliable-branch masks") {
  Rng rng(704);
  const Eigen::Index n = 400;
  MaskSet3D masks;
  masks.membership = oracle::random_disjoint_masks(rng, n, 12);
  masks.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
  const LabelArray y = oracle::random_labels(rng, n, 6, 0.9);
  const LabelArray yr = oracle::random_labels(rng, n, 6, 0.4);

  Eigen::Index previous = masks.mask_count() + 1;
  for (const double eta : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    PropagateStats stats;
    propagate(y, yr, masks, {eta}, &stats);
    CHECK(stats.reliable_branch_masks <= previous);
    previous = stats.reliable_branch_masks;
  }
}

TEST_CASE("propagate is invariant to point permutation within masks") {
  Rng rng(705);
  const Eigen::Index n = 60;
  MaskSet3D masks;
  masks.membership = oracle::random_disjoint_masks(rng, n, 5);
  masks.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
  const LabelArray y = oracle::random_labels(rng, n, 4, 0.7);
  const LabelArray yr = oracle::random_labels(rng, n, 4, 0.5);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    perm[static_cast<std::size_t>(i)] = i;
  }
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  }
  MaskSet3D shuffled;
  shuffled.membership = BoolMatrix::Constant(masks.mask_count(), n, false);
  shuffled.provenance.resize(static_cast<std::size_t>(masks.mask_count()));
  LabelArray y2(n);
  LabelArray yr2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    shuffled.membership.col(i) =
        masks.membership.col(perm[static_cast<std::size_t>(i)]);
    y2[i] = y[perm[static_cast<std::size_t>(i)]];
    yr2[i] = yr[perm[static_cast<std::size_t>(i)]];
  }

  const LabelArray base = propagate(y, yr, masks, {0.5});
  const LabelArray mixed = propagate(y2, yr2, shuffled, {0.5});
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(mixed[i] == base[perm[static_cast<std::size_t>(i)]]);
  }
}
