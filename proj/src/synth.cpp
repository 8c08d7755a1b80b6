#include "masklift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "masklift/rng.hpp"

namespace masklift {

void validate_synth_spec(const SynthSpec& spec) {
  const auto positive = [](double v) { return v > 0 && std::isfinite(v); };
  if (!positive(spec.room_width) || !positive(spec.room_depth) ||
      !positive(spec.room_height)) {
    fail("synth spec: room extents must be positive");
  }
  if (spec.box_pairs < 1) {
    fail("synth spec: at least one box pair is required");
  }
  if (spec.camera_count < 1) {
    fail("synth spec: at least one camera is required");
  }
  if (!positive(spec.inset) || !positive(spec.clearance) ||
      !positive(spec.pair_gap) || !positive(spec.pair_margin)) {
    fail("synth spec: gaps and clearances must be positive");
  }
  if (spec.pair_gap < spec.clearance || spec.inset < spec.clearance) {
    fail("synth spec: pair_gap and inset must be at least the clearance");
  }
  if (!(spec.box_min_size > 0) || spec.box_min_size > spec.box_max_size) {
    fail("synth spec: invalid box size range");
  }
  if (!(spec.box_min_height >= spec.clearance) ||
      spec.box_min_height > spec.box_max_height) {
    fail("synth spec: box height range must start at or above the clearance");
  }
  if (spec.points_per_surface < 1 || spec.points_per_box < 6) {
    fail("synth spec: too few points per surface");
  }
  if (spec.image_width < 1 || spec.image_height < 1 || !positive(spec.focal)) {
    fail("synth spec: invalid camera image parameters");
  }
  if (!positive(spec.depth_scale) || !positive(spec.delta_depth)) {
    fail("synth spec: depth_scale and delta_depth must be positive");
  }
  if (!(0.5 / spec.depth_scale < spec.delta_depth / 10.0)) {
    fail("synth spec: depth quantization error 0.5/depth_scale must stay "
         "below delta_depth/10");
  }
  const double ring_radius =
      spec.camera_radius_scale * std::min(spec.room_width, spec.room_depth);
  if (!(ring_radius > spec.camera_margin + spec.box_max_size)) {
    fail("synth spec: camera ring too tight for the box region");
  }
  if (!(ring_radius <
        std::min(spec.room_width, spec.room_depth) / 2.0 - spec.clearance)) {
    fail("synth spec: camera ring would leave the room");
  }
  if (!(spec.camera_height > spec.box_max_height + spec.box_max_size +
                                 spec.clearance)) {
    fail("synth spec: cameras must sit above the boxes by the clearance");
  }
  if (spec.camera_height >= spec.room_height ||
      !(spec.look_at_height > 0 && spec.look_at_height < spec.camera_height)) {
    fail("synth spec: camera and look-at heights must fit inside the room");
  }
}

namespace {

struct Aabb {
  Vec3 lo;
  Vec3 hi;
};

double aabb_distance(const Aabb& a, const Aabb& b) {
  double sq = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const double gap =
        std::max({0.0, b.lo[axis] - a.hi[axis], a.lo[axis] - b.hi[axis]});
    sq += gap * gap;
  }
  return std::sqrt(sq);
}

double max_corner_radius(const Aabb& box) {
  double best = 0;
  for (const double x : {box.lo.x(), box.hi.x()}) {
    for (const double y : {box.lo.y(), box.hi.y()}) {
      best = std::max(best, std::hypot(x, y));
    }
  }
  return best;
}

struct Rect {
  Vec3 origin;
  Vec3 e1;
  Vec3 e2;
  int object = 0;
  int cls = 0;
  int points = 0;
};

std::vector<Rect> box_faces(const Aabb& box, int object, int cls) {
  const Vec3 size = box.hi - box.lo;
  const Vec3 ex(size.x(), 0, 0);
  const Vec3 ey(0, size.y(), 0);
  const Vec3 ez(0, 0, size.z());
  std::vector<Rect> faces;
  faces.push_back({box.lo, ex, ey, object, cls, 0});                  // bottom
  faces.push_back({box.lo + ez, ex, ey, object, cls, 0});             // top
  faces.push_back({box.lo, ey, ez, object, cls, 0});                  // x-
  faces.push_back({box.lo + ex, ey, ez, object, cls, 0});             // x+
  faces.push_back({box.lo, ex, ez, object, cls, 0});                  // y-
  faces.push_back({box.lo + ey, ex, ez, object, cls, 0});             // y+
  return faces;
}

CameraPose look_at_pose(const Vec3& position, const Vec3& target) {
  const Vec3 forward = (target - position).normalized();
  const Vec3 world_up(0, 0, 1);
  Vec3 right = forward.cross(world_up);
  const double norm = right.norm();
  if (norm < 1e-9) {
    fail("look_at_pose: view direction is vertical");
  }
  right /= norm;
  const Vec3 down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -(pose.rotation * position);
  return pose;
}

}  // namespace

SynthScene generate_scene(const SynthSpec& spec) {
  validate_synth_spec(spec);
  Rng rng(spec.seed);

  const double half_w = spec.room_width / 2.0;
  const double half_d = spec.room_depth / 2.0;
  const double ring_radius =
      spec.camera_radius_scale * std::min(spec.room_width, spec.room_depth);
  const double box_radius_limit = ring_radius - spec.camera_margin;

  // Boxes come in same-class pairs, each pair separated from everything else
  // by pair_margin so the pair partner is always the closest foreign object.
  std::vector<Aabb> boxes;
  std::vector<int> box_class;
  for (int pair = 0; pair < spec.box_pairs; ++pair) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Vec3 size_a, size_b;
      for (int axis = 0; axis < 3; ++axis) {
        size_a[axis] = rng.uniform(spec.box_min_size, spec.box_max_size);
      }
      for (int axis = 0; axis < 3; ++axis) {
        size_b[axis] = rng.uniform(spec.box_min_size, spec.box_max_size);
      }
      const double base_a =
          rng.uniform(spec.box_min_height, spec.box_max_height);
      const double base_b =
          rng.uniform(spec.box_min_height, spec.box_max_height);
      const double cx = rng.uniform(-box_radius_limit, box_radius_limit);
      const double cy = rng.uniform(-box_radius_limit, box_radius_limit);
      const int axis = static_cast<int>(rng.uniform_index(2));
      const double direction = rng.uniform_index(2) == 0 ? -1.0 : 1.0;
      const double slide = rng.uniform(-0.15, 0.15);

      Aabb a;
      a.lo = Vec3(cx - size_a.x() / 2, cy - size_a.y() / 2, base_a);
      a.hi = a.lo + size_a;
      Vec3 center_b(cx, cy, base_b + size_b.z() / 2);
      center_b[axis] += direction * (size_a[axis] / 2 + spec.pair_gap +
                                     size_b[axis] / 2);
      center_b[1 - axis] += slide;
      Aabb b;
      b.lo = center_b - size_b / 2;
      b.hi = center_b + size_b / 2;

      if (max_corner_radius(a) > box_radius_limit ||
          max_corner_radius(b) > box_radius_limit) {
        continue;
      }
      bool clear = true;
      for (const Aabb& other : boxes) {
        if (aabb_distance(a, other) < spec.pair_margin ||
            aabb_distance(b, other) < spec.pair_margin) {
          clear = false;
          break;
        }
      }
      if (!clear) {
        continue;
      }
      boxes.push_back(a);
      boxes.push_back(b);
      box_class.push_back(2 + pair);
      box_class.push_back(2 + pair);
      placed = true;
    }
    if (!placed) {
      fail("generate_scene: could not place box pair " + std::to_string(pair) +
           "; the room is too crowded for the requested layout");
    }
  }

  // Surfaces in fixed order: two floor slabs, four walls, then box faces.
  const double floor_x_min = -half_w + spec.inset;
  const double floor_x_max = half_w - spec.inset;
  const double floor_y_min = -half_d + spec.inset;
  const double floor_y_max = half_d - spec.inset;
  const double slab_half_gap = std::max(spec.clearance, 0.4) / 2.0;
  const double floor_y_len = floor_y_max - floor_y_min;

  std::vector<Rect> surfaces;
  surfaces.push_back({Vec3(floor_x_min, floor_y_min, 0),
                      Vec3(-slab_half_gap - floor_x_min, 0, 0),
                      Vec3(0, floor_y_len, 0), 0, 0,
                      spec.points_per_surface});
  surfaces.push_back({Vec3(slab_half_gap, floor_y_min, 0),
                      Vec3(floor_x_max - slab_half_gap, 0, 0),
                      Vec3(0, floor_y_len, 0), 1, 0,
                      spec.points_per_surface});

  const double wall_y_len = spec.room_depth - 2 * spec.inset;
  const double wall_x_len = spec.room_width - 2 * spec.inset;
  const Vec3 up(0, 0, spec.room_height);
  surfaces.push_back({Vec3(-half_w, -half_d + spec.inset, 0),
                      Vec3(0, wall_y_len, 0), up, 2, 1,
                      spec.points_per_surface});
  surfaces.push_back({Vec3(half_w, -half_d + spec.inset, 0),
                      Vec3(0, wall_y_len, 0), up, 3, 1,
                      spec.points_per_surface});
  surfaces.push_back({Vec3(-half_w + spec.inset, -half_d, 0),
                      Vec3(wall_x_len, 0, 0), up, 4, 1,
                      spec.points_per_surface});
  surfaces.push_back({Vec3(-half_w + spec.inset, half_d, 0),
                      Vec3(wall_x_len, 0, 0), up, 5, 1,
                      spec.points_per_surface});

  for (std::size_t b = 0; b < boxes.size(); ++b) {
    std::vector<Rect> faces =
        box_faces(boxes[b], 6 + static_cast<int>(b), box_class[b]);
    double total_area = 0;
    for (const Rect& face : faces) {
      total_area += face.e1.norm() * face.e2.norm();
    }
    for (Rect& face : faces) {
      const double area = face.e1.norm() * face.e2.norm();
      face.points = std::max<int>(
          1, static_cast<int>(std::llround(spec.points_per_box * area /
                                           total_area)));
      surfaces.push_back(face);
    }
  }

  Eigen::Index total_points = 0;
  for (const Rect& surface : surfaces) {
    total_points += surface.points;
  }

  SynthScene out;
  out.object_count = 6 + static_cast<int>(boxes.size());
  out.scene.cloud.positions.resize(total_points, 3);
  out.scene.cloud.colors.emplace(total_points, 3);
  LabelArray gt(total_points);
  out.object_ids.resize(total_points);

  const auto fract = [](double x) { return x - std::floor(x); };
  Eigen::Index row = 0;
  for (const Rect& surface : surfaces) {
    const double red = fract(0.17 + 0.61 * surface.cls);
    const double green = fract(0.45 + 0.37 * surface.cls);
    const double blue = fract(0.80 + 0.23 * surface.cls);
    for (int p = 0; p < surface.points; ++p) {
      const Vec3 pos = surface.origin + rng.uniform() * surface.e1 +
                       rng.uniform() * surface.e2;
      out.scene.cloud.positions.row(row) = pos.transpose();
      (*out.scene.cloud.colors)(row, 0) = red;
      (*out.scene.cloud.colors)(row, 1) = green;
      (*out.scene.cloud.colors)(row, 2) = blue;
      gt[row] = surface.cls;
      out.object_ids[row] = surface.object;
      ++row;
    }
  }
  out.scene.gt = gt;
  out.scene.sparse = LabelArray::Constant(total_points, kIgnoreLabel);
  out.scene.meta.num_classes = 2 + spec.box_pairs;
  out.scene.meta.depth_scale = spec.depth_scale;
  out.scene.meta.delta_depth = spec.delta_depth;

  // Camera ring with a seeded phase; all cameras look at the room axis.
  const Vec3 target(0, 0, spec.look_at_height);
  const double phase = rng.uniform(0, 2 * std::numbers::pi);
  for (int cam = 0; cam < spec.camera_count; ++cam) {
    const double angle =
        phase + 2 * std::numbers::pi * cam / spec.camera_count;
    const Vec3 position(ring_radius * std::cos(angle),
                        ring_radius * std::sin(angle), spec.camera_height);
    ViewObservation view;
    char name[16];
    std::snprintf(name, sizeof(name), "view%02d", cam);
    view.name = name;
    view.intrinsics.fx = spec.focal;
    view.intrinsics.fy = spec.focal;
    view.intrinsics.cx = spec.image_width / 2.0;
    view.intrinsics.cy = spec.image_height / 2.0;
    view.intrinsics.width = spec.image_width;
    view.intrinsics.height = spec.image_height;
    view.pose = look_at_pose(position, target);

    const ProjectedPoints projected = project_points(
        out.scene.cloud, compose_projection(view.intrinsics, view.pose));
    Eigen::MatrixXd zbuf = Eigen::MatrixXd::Constant(
        spec.image_height, spec.image_width,
        std::numeric_limits<double>::infinity());
    Eigen::MatrixXi winner =
        Eigen::MatrixXi::Constant(spec.image_height, spec.image_width, -1);
    for (Eigen::Index i = 0; i < total_points; ++i) {
      if (projected.behind[i]) {
        continue;
      }
      const int u = pixel_from_raw(projected.u[i]);
      const int v = pixel_from_raw(projected.v[i]);
      if (u < 0 || u >= spec.image_width || v < 0 || v >= spec.image_height) {
        continue;
      }
      if (projected.depth[i] < zbuf(v, u)) {
        zbuf(v, u) = projected.depth[i];
        winner(v, u) = out.object_ids[i];
      }
    }

    view.depth.values =
        Eigen::MatrixXd::Zero(spec.image_height, spec.image_width);
    std::map<int, int> object_to_mask;
    for (Eigen::Index r = 0; r < winner.rows(); ++r) {
      for (Eigen::Index c = 0; c < winner.cols(); ++c) {
        if (winner(r, c) >= 0) {
          object_to_mask.emplace(winner(r, c), 0);
        }
      }
    }
    int next_id = 1;
    for (auto& [object, id] : object_to_mask) {
      id = next_id++;
    }
    view.mask2d.ids =
        Eigen::MatrixXi::Zero(spec.image_height, spec.image_width);
    view.mask2d.num_masks = next_id - 1;
    for (Eigen::Index r = 0; r < winner.rows(); ++r) {
      for (Eigen::Index c = 0; c < winner.cols(); ++c) {
        if (winner(r, c) < 0) {
          continue;
        }
        const long long stored =
            std::llround(zbuf(r, c) * spec.depth_scale);
        if (stored < 1 || stored > 65535) {
          fail("generate_scene: rendered depth " +
               std::to_string(zbuf(r, c)) + " m does not fit the 16-bit "
               "storage grid; adjust depth_scale or the room size");
        }
        view.depth.values(r, c) =
            static_cast<double>(stored) / spec.depth_scale;
        view.mask2d.ids(r, c) = object_to_mask.at(winner(r, c));
      }
    }
    out.scene.views.push_back(std::move(view));
  }

  validate_scene(out.scene, "generate_scene");
  return out;
}

LabelArray sample_sparse(const LabelArray& gt, SparseScheme scheme, int n,
                         std::uint64_t seed, const LabelArray& object_ids) {
  const Eigen::Index total = gt.size();
  if (total < 1) {
    fail("sample_sparse: empty ground truth");
  }
  LabelArray sparse = LabelArray::Constant(total, kIgnoreLabel);
  Rng rng(seed);
  if (scheme == SparseScheme::kFixedCount) {
    if (n < 1) {
      fail("sample_sparse: n must be at least 1");
    }
    if (n > total) {
      fail("sample_sparse: n=" + std::to_string(n) + " exceeds the " +
           std::to_string(total) + " available points");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0; i < total; ++i) {
      order[static_cast<std::size_t>(i)] = i;
    }
    for (int pick = 0; pick < n; ++pick) {
      const auto offset = static_cast<Eigen::Index>(
          rng.uniform_index(static_cast<std::uint64_t>(total - pick)));
      std::swap(order[static_cast<std::size_t>(pick)],
                order[static_cast<std::size_t>(pick + offset)]);
      const Eigen::Index chosen = order[static_cast<std::size_t>(pick)];
      sparse[chosen] = gt[chosen];
    }
    return sparse;
  }

  if (object_ids.size() != total) {
    fail("sample_sparse: one-per-object sampling needs object ids for every "
         "point");
  }
  std::map<int, std::vector<Eigen::Index>> by_object;
  for (Eigen::Index i = 0; i < total; ++i) {
    if (object_ids[i] < 0) {
      fail("sample_sparse: negative object id at point " + std::to_string(i));
    }
    by_object[object_ids[i]].push_back(i);
  }
  for (const auto& [object, indices] : by_object) {
    const auto pick = static_cast<std::size_t>(
        rng.uniform_index(indices.size()));
    sparse[indices[pick]] = gt[indices[pick]];
  }
  return sparse;
}

SynthSpec synth_spec_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail("synth spec: cannot open " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("synth spec: invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    fail("synth spec: " + path.string() + " must hold a JSON object");
  }
  SynthSpec spec;
  const auto take_real = [&](const char* key, double& field) {
    if (doc.contains(key)) {
      field = doc[key].get<double>();
      doc.erase(key);
    }
  };
  const auto take_int = [&](const char* key, int& field) {
    if (doc.contains(key)) {
      field = doc[key].get<int>();
      doc.erase(key);
    }
  };
  if (doc.contains("seed")) {
    spec.seed = doc["seed"].get<std::uint64_t>();
    doc.erase("seed");
  }
  take_real("room_width", spec.room_width);
  take_real("room_depth", spec.room_depth);
  take_real("room_height", spec.room_height);
  take_real("inset", spec.inset);
  take_real("clearance", spec.clearance);
  take_int("box_pairs", spec.box_pairs);
  take_real("box_min_size", spec.box_min_size);
  take_real("box_max_size", spec.box_max_size);
  take_real("pair_gap", spec.pair_gap);
  take_real("pair_margin", spec.pair_margin);
  take_real("box_min_height", spec.box_min_height);
  take_real("box_max_height", spec.box_max_height);
  take_int("points_per_surface", spec.points_per_surface);
  take_int("points_per_box", spec.points_per_box);
  take_int("camera_count", spec.camera_count);
  take_real("camera_height", spec.camera_height);
  take_real("camera_radius_scale", spec.camera_radius_scale);
  take_real("camera_margin", spec.camera_margin);
  take_real("look_at_height", spec.look_at_height);
  take_int("image_width", spec.image_width);
  take_int("image_height", spec.image_height);
  take_real("focal", spec.focal);
  take_real("depth_scale", spec.depth_scale);
  take_real("delta_depth", spec.delta_depth);
  if (!doc.empty()) {
    fail("synth spec: unknown key '" + doc.begin().key() + "' in " +
         path.string());
  }
  validate_synth_spec(spec);
  return spec;
}

}  // namespace masklift
