#pragma once

#include <cstdint>
#include <filesystem>

#include "masklift/scene.hpp"

namespace masklift {

/// Parameters of the synthetic room family: an inset floor split into two
/// slabs, four walls that stop short of each other, and axis-aligned boxes
/// floating in same-class pairs, viewed by a camera ring. Every surface
/// keeps at least `clearance` meters from every other object, so points of
/// different objects can never pass the depth test on one another's pixels.
struct SynthSpec {
  std::uint64_t seed = 1;

  double room_width = 9.0;   // x extent, meters
  double room_depth = 9.0;   // y extent
  double room_height = 3.0;  // z extent

  double inset = 0.3;      // gap floor-to-wall and wall-to-wall
  double clearance = 0.3;  // minimum gap between distinct objects

  int box_pairs = 5;            // each pair shares one class
  double box_min_size = 0.4;    // per-axis extent range
  double box_max_size = 0.8;
  double pair_gap = 0.35;       // gap between the two boxes of a pair
  double pair_margin = 0.8;     // gap between different pairs
  double box_min_height = 0.3;  // bottom face above the floor
  double box_max_height = 0.6;

  int points_per_surface = 500;  // each floor slab and each wall
  int points_per_box = 260;      // split over the 6 faces by area

  int camera_count = 6;
  double camera_height = 1.8;
  double camera_radius_scale = 0.42;  // ring radius over min(width, depth)
  double camera_margin = 0.7;         // boxes keep this far from the ring
  double look_at_height = 0.9;

  int image_width = 160;
  int image_height = 120;
  double focal = 110.0;  // fx = fy, pixels

  double depth_scale = 1000.0;
  double delta_depth = 0.05;
};

void validate_synth_spec(const SynthSpec& spec);

/// JSON (de)serialization of the spec; unknown keys are an error.
SynthSpec synth_spec_from_json_file(const std::filesystem::path& path);

struct SynthScene {
  SceneBundle scene;      // sparse starts all-ignore; gt and views filled in
  LabelArray object_ids;  // per point, 0-based
  int object_count = 0;
};

/// Deterministic in spec.seed: samples surface points with known class and
/// object, then renders every ring camera with a point-splat z-buffer using
/// the shared pixel rounding rule. Rendered depths are quantized to the
/// 16-bit storage grid at render time, so saving and reloading the scene is
/// exact.
SynthScene generate_scene(const SynthSpec& spec);

enum class SparseScheme {
  kFixedCount,   // n uniformly chosen distinct points keep their gt label
  kOnePerObject  // exactly one point per object keeps its gt label
};

LabelArray sample_sparse(const LabelArray& gt, SparseScheme scheme, int n,
                         std::uint64_t seed, const LabelArray& object_ids);

}  // namespace masklift
