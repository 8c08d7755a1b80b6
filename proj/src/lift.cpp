#include "masklift/lift.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace masklift {

void validate_mask2d(const MaskSet2D& masks, const std::string& context) {
  if (masks.num_masks < 0) {
    fail(context + ": negative mask count");
  }
  std::vector<bool> seen(static_cast<std::size_t>(masks.num_masks) + 1, false);
  for (Eigen::Index r = 0; r < masks.ids.rows(); ++r) {
    for (Eigen::Index c = 0; c < masks.ids.cols(); ++c) {
      const int id = masks.ids(r, c);
      if (id < 0 || id > masks.num_masks) {
        fail(context + ": mask id " + std::to_string(id) +
             " outside [0," + std::to_string(masks.num_masks) + "] at pixel (" +
             std::to_string(c) + "," + std::to_string(r) + ")");
      }
      seen[static_cast<std::size_t>(id)] = true;
    }
  }
  for (int id = 1; id <= masks.num_masks; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      fail(context + ": mask ids are not contiguous, id " + std::to_string(id) +
           " never appears");
    }
  }
}

std::vector<Eigen::Index> sample_views(Eigen::Index view_count, int target) {
  if (view_count < 1) {
    fail("sample_views: empty view list");
  }
  if (target < 1) {
    fail("sample_views: target count must be at least 1");
  }
  std::vector<Eigen::Index> indices;
  if (target >= view_count) {
    indices.resize(static_cast<std::size_t>(view_count));
    for (Eigen::Index i = 0; i < view_count; ++i) {
      indices[static_cast<std::size_t>(i)] = i;
    }
    return indices;
  }
  if (target == 1) {
    indices.push_back(pixel_round(static_cast<double>(view_count - 1) / 2.0));
    return indices;
  }
  for (int j = 0; j < target; ++j) {
    const double raw = static_cast<double>(j) *
                       static_cast<double>(view_count - 1) /
                       static_cast<double>(target - 1);
    const Eigen::Index idx = pixel_round(raw);
    if (indices.empty() || indices.back() != idx) {
      indices.push_back(idx);
    }
  }
  return indices;
}

MaskSet3DView backproject_masks(const MaskSet2D& masks,
                                const LinkMatrix& link) {
  const Eigen::Index n = link.size();
  MaskSet3DView view;
  view.membership = BoolMatrix::Constant(masks.num_masks, n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!link.valid[i]) {
      continue;
    }
    if (link.v[i] >= masks.ids.rows() || link.u[i] >= masks.ids.cols()) {
      fail("backproject_masks: link pixel (" + std::to_string(link.u[i]) +
           "," + std::to_string(link.v[i]) + ") outside the mask image");
    }
    const int id = masks.ids(link.v[i], link.u[i]);
    if (id > 0) {
      view.membership(id - 1, i) = true;
    }
  }
  return view;
}

namespace {

struct AccumulatedMask {
  BoolArray points;
  Eigen::Index size = 0;
  std::vector<MaskProvenance> provenance;
};

}  // namespace

MaskSet3D merge_mask_sets(const std::vector<MaskSet3DView>& view_sets,
                          double overlap_threshold) {
  MaskSet3D fused;
  if (view_sets.empty()) {
    fused.membership = BoolMatrix(0, 0);
    return fused;
  }
  const Eigen::Index n = view_sets.front().point_count();
  for (const MaskSet3DView& set : view_sets) {
    if (set.point_count() != n) {
      fail("merge_mask_sets: view sets disagree on point count (" +
           std::to_string(set.point_count()) + " vs " + std::to_string(n) +
           ")");
    }
  }

  std::vector<AccumulatedMask> accumulator;
  for (std::size_t view = 0; view < view_sets.size(); ++view) {
    const BoolMatrix& membership = view_sets[view].membership;
    for (Eigen::Index m = 0; m < membership.rows(); ++m) {
      BoolArray row = membership.row(m).transpose();
      const Eigen::Index count = row.count();
      if (count == 0) {
        continue;
      }
      const MaskProvenance origin{static_cast<Eigen::Index>(view),
                                  static_cast<int>(m) + 1};
      if (view == 0) {
        accumulator.push_back({std::move(row), count, {origin}});
        continue;
      }
      std::size_t best = 0;
      double best_overlap = 0.0;
      for (std::size_t a = 0; a < accumulator.size(); ++a) {
        const Eigen::Index inter = (row && accumulator[a].points).count();
        const double overlap = static_cast<double>(inter) /
                               static_cast<double>(std::min(count, accumulator[a].size));
        if (overlap > best_overlap) {
          best_overlap = overlap;
          best = a;
        }
      }
      if (best_overlap > overlap_threshold) {
        accumulator[best].points = accumulator[best].points || row;
        accumulator[best].size = accumulator[best].points.count();
        accumulator[best].provenance.push_back(origin);
      } else {
        accumulator.push_back({std::move(row), count, {origin}});
      }
    }
  }

  // Resolve multi-membership: each point goes to the largest claiming mask
  // (ties to the lowest mask index), judged on pre-resolution sizes.
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t owner = 0;
    Eigen::Index owner_size = -1;
    int claims = 0;
    for (std::size_t a = 0; a < accumulator.size(); ++a) {
      if (accumulator[a].points[i]) {
        ++claims;
        if (accumulator[a].size > owner_size) {
          owner_size = accumulator[a].size;
          owner = a;
        }
      }
    }
    if (claims > 1) {
      for (std::size_t a = 0; a < accumulator.size(); ++a) {
        if (a != owner) {
          accumulator[a].points[i] = false;
        }
      }
    }
  }

  std::vector<const AccumulatedMask*> kept;
  for (const AccumulatedMask& mask : accumulator) {
    if (mask.points.count() > 0) {
      kept.push_back(&mask);
    }
  }

  fused.membership = BoolMatrix::Constant(static_cast<Eigen::Index>(kept.size()), n, false);
  fused.provenance.reserve(kept.size());
  for (std::size_t t = 0; t < kept.size(); ++t) {
    fused.membership.row(static_cast<Eigen::Index>(t)) =
        kept[t]->points.transpose();
    fused.provenance.push_back(kept[t]->provenance);
  }
  return fused;
}

namespace {

void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in, const std::string& context) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    fail(context + ": truncated file");
  }
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void save_mask_set(const MaskSet3D& masks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail("save_mask_set: cannot open " + path.string() + " for writing");
  }
  const Eigen::Index t = masks.mask_count();
  const Eigen::Index n = masks.point_count();
  write_u64(out, static_cast<std::uint64_t>(t));
  write_u64(out, static_cast<std::uint64_t>(n));
  const Eigen::Index row_bytes = (n + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
  for (Eigen::Index r = 0; r < t; ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (masks.membership(r, i)) {
        row[static_cast<std::size_t>(i / 8)] |=
            static_cast<unsigned char>(1u << (i % 8));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) {
    fail("save_mask_set: write to " + path.string() + " failed");
  }
}

MaskSet3D load_mask_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail("load_mask_set: cannot open " + path.string());
  }
  const std::string context = "load_mask_set: " + path.string();
  const auto t = static_cast<Eigen::Index>(read_u64(in, context));
  const auto n = static_cast<Eigen::Index>(read_u64(in, context));
  MaskSet3D masks;
  masks.membership = BoolMatrix::Constant(t, n, false);
  const Eigen::Index row_bytes = (n + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
  for (Eigen::Index r = 0; r < t; ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size()))) {
      fail(context + ": truncated mask row " + std::to_string(r));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      masks.membership(r, i) =
          (row[static_cast<std::size_t>(i / 8)] >> (i % 8)) & 1u;
    }
  }
  masks.provenance.assign(static_cast<std::size_t>(t), {});
  return masks;
}

void save_mask_provenance(const MaskSet3D& masks,
                          const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["mask_count"] = masks.mask_count();
  doc["point_count"] = masks.point_count();
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index t = 0; t < masks.mask_count(); ++t) {
    nlohmann::json entry;
    entry["size"] = static_cast<std::int64_t>(masks.membership.row(t).count());
    nlohmann::json sources = nlohmann::json::array();
    for (const MaskProvenance& p : masks.provenance[static_cast<std::size_t>(t)]) {
      sources.push_back({{"view", p.view}, {"mask2d_id", p.mask2d_id}});
    }
    entry["sources"] = sources;
    rows.push_back(entry);
  }
  doc["masks"] = rows;
  std::ofstream out(path);
  if (!out) {
    fail("save_mask_provenance: cannot open " + path.string() + " for writing");
  }
  out << doc.dump(2) << "\n";
}

}  // namespace masklift
