#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "masklift/core.hpp"
#include "masklift/geometry.hpp"
#include "masklift/scene_io.hpp"
#include "masklift/synth.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace masklift;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.box_pairs = 2;
  spec.points_per_surface = 200;
  spec.points_per_box = 120;
  spec.camera_count = 4;
  spec.image_width = 96;
  spec.image_height = 72;
  spec.focal = 70.0;
  return spec;
}

}  // namespace

TEST_CASE("generate_scene produces a valid, consistent bundle") {
  const SynthScene synth = generate_scene(small_spec(5));
  const SceneBundle& scene = synth.scene;

  CHECK_NOTHROW(validate_scene(scene, "test"));
  REQUIRE(scene.gt.has_value());
  CHECK(scene.size() == synth.object_ids.size());
  CHECK(scene.views.size() == 4);
  CHECK(scene.meta.num_classes == 2 + 2);  // floor, walls, one per pair
  CHECK(count_labeled(scene.sparse) == 0);
  CHECK(synth.object_count == 2 + 4 + 4);  // slabs, walls, two box pairs

  std::set<int> objects;
  for (Eigen::Index i = 0; i < synth.object_ids.size(); ++i) {
    REQUIRE(synth.object_ids[i] >= 0);
    REQUIRE(synth.object_ids[i] < synth.object_count);
    objects.insert(synth.object_ids[i]);
  }
  CHECK(static_cast<int>(objects.size()) == synth.object_count);

  // Each object carries exactly one class.
  std::map<int, int> object_class;
  for (Eigen::Index i = 0; i < synth.object_ids.size(); ++i) {
    const auto [it, inserted] =
        object_class.emplace(synth.object_ids[i], (*scene.gt)[i]);
    CHECK(it->second == (*scene.gt)[i]);
  }
}

TEST_CASE("generate_scene is bit-identical for a fixed seed") {
  const SynthScene a = generate_scene(small_spec(9));
  const SynthScene b = generate_scene(small_spec(9));
  CHECK((a.scene.cloud.positions - b.scene.cloud.positions)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((a.scene.gt->array() == b.scene.gt->array()).all());
  CHECK((a.object_ids.array() == b.object_ids.array()).all());
  REQUIRE(a.scene.views.size() == b.scene.views.size());
  for (std::size_t v = 0; v < a.scene.views.size(); ++v) {
    CHECK(a.scene.views[v].name == b.scene.views[v].name);
    CHECK((a.scene.views[v].depth.values - b.scene.views[v].depth.values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((a.scene.views[v].mask2d.ids.array() ==
           b.scene.views[v].mask2d.ids.array())
              .all());
    CHECK((a.scene.views[v].pose.rotation - b.scene.views[v].pose.rotation)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  const SynthScene c = generate_scene(small_spec(10));
  CHECK((a.scene.cloud.positions - c.scene.cloud.positions)
            .cwiseAbs()
            .maxCoeff() > 0.0);
}

TEST_CASE("rendered depth equals the exhaustive per-pixel minimum") {
  const SynthScene synth = generate_scene(small_spec(21));
  for (const ViewObservation& view : synth.scene.views) {
    const Eigen::MatrixXd expected =
        oracle::depth_grid(synth.scene.cloud, view.intrinsics, view.pose,
                           synth.scene.meta.depth_scale);
    CHECK((view.depth.values - expected).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mask pixels agree with the winning point's object") {
  const SynthScene synth = generate_scene(small_spec(22));
  const SceneBundle& scene = synth.scene;
  for (const ViewObservation& view : scene.views) {
    // Every mask id present in the image must map to exactly one object.
    std::map<int, std::set<int>> id_objects;
    const auto projection =
        compose_projection(view.intrinsics, view.pose);
    const auto projected = project_points(scene.cloud, projection);
    for (Eigen::Index i = 0; i < projected.size(); ++i) {
      if (projected.behind[i]) {
        continue;
      }
      const int u = pixel_from_raw(projected.u[i]);
      const int v = pixel_from_raw(projected.v[i]);
      if (u < 0 || u >= view.intrinsics.width || v < 0 ||
          v >= view.intrinsics.height) {
        continue;
      }
      // Stored depths were quantized at render time; quantize the candidate
      // the same way before comparing.
      const double d = view.depth.values(v, u);
      const double q = static_cast<double>(std::llround(
                           projected.depth[i] * scene.meta.depth_scale)) /
                       scene.meta.depth_scale;
      if (d > 0 && q == d) {
        id_objects[view.mask2d.ids(v, u)].insert(synth.object_ids[i]);
      }
    }
    CHECK(id_objects.size() > 1);
    for (const auto& [id, objects] : id_objects) {
      if (id == 0) {
        continue;  // unsegmented pixels carry no claim
      }
      CHECK(objects.size() == 1);
    }
    // Ids are contiguous from 1.
    int max_id = 0;
    for (const auto& [id, objects] : id_objects) {
      max_id = std::max(max_id, id);
    }
    CHECK(max_id == view.mask2d.num_masks);
  }
}

TEST_CASE("synthetic scenes survive a save/load round trip exactly") {
  const SynthScene synth = generate_scene(small_spec(31));
  fixtures::TempDir dir("masklift_synth_rt");
  save_scene(synth.scene, dir.path());
  const SceneBundle loaded = load_scene(dir.path());

  CHECK((loaded.cloud.positions - synth.scene.cloud.positions)
            .cwiseAbs()
            .maxCoeff() <= 1e-9);
  CHECK((loaded.gt->array() == synth.scene.gt->array()).all());
  REQUIRE(loaded.views.size() == synth.scene.views.size());
  for (std::size_t v = 0; v < loaded.views.size(); ++v) {
    // Depths were quantized at render time, so the png round trip is exact.
    CHECK((loaded.views[v].depth.values -
           synth.scene.views[v].depth.values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded.views[v].mask2d.ids.array() ==
           synth.scene.views[v].mask2d.ids.array())
              .all());
  }
}

TEST_CASE("sample_sparse schemes") {
  const SynthScene synth = generate_scene(small_spec(41));
  const LabelArray& gt = *synth.scene.gt;
  const Eigen::Index n = gt.size();

  SUBCASE("fixed count keeps exactly n correct labels") {
    const LabelArray sparse =
        sample_sparse(gt, SparseScheme::kFixedCount, 20, 3, synth.object_ids);
    CHECK(count_labeled(sparse) == 20);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (sparse[i] != kIgnoreLabel) {
        CHECK(sparse[i] == gt[i]);
      }
    }
  }
  SUBCASE("fixed count equal to N reproduces the ground truth") {
    const LabelArray sparse = sample_sparse(
        gt, SparseScheme::kFixedCount, static_cast<int>(n), 3,
        synth.object_ids);
    CHECK((sparse.array() == gt.array()).all());
  }
  SUBCASE("one per object labels each object once") {
    const LabelArray sparse =
        sample_sparse(gt, SparseScheme::kOnePerObject, 0, 7, synth.object_ids);
    CHECK(count_labeled(sparse) == synth.object_count);
    std::set<int> labeled_objects;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (sparse[i] != kIgnoreLabel) {
        CHECK(sparse[i] == gt[i]);
        CHECK(labeled_objects.insert(synth.object_ids[i]).second);
      }
    }
    CHECK(static_cast<int>(labeled_objects.size()) == synth.object_count);
  }
  SUBCASE("sampling is seed-deterministic") {
    const LabelArray a =
        sample_sparse(gt, SparseScheme::kFixedCount, 25, 5, synth.object_ids);
    const LabelArray b =
        sample_sparse(gt, SparseScheme::kFixedCount, 25, 5, synth.object_ids);
    const LabelArray c =
        sample_sparse(gt, SparseScheme::kFixedCount, 25, 6, synth.object_ids);
    CHECK((a.array() == b.array()).all());
    CHECK((a.array() != c.array()).any());
  }
  SUBCASE("n beyond N is an error") {
    CHECK_THROWS(sample_sparse(gt, SparseScheme::kFixedCount,
                               static_cast<int>(n) + 1, 3,
                               synth.object_ids));
    CHECK_THROWS(
        sample_sparse(gt, SparseScheme::kFixedCount, 0, 3, synth.object_ids));
  }
}

TEST_CASE("synth spec json parsing") {
  fixtures::TempDir dir("masklift_spec");

  SUBCASE("partial spec overrides defaults") {
    std::ofstream(dir / "spec.json")
        << R"({"seed": 12, "box_pairs": 3, "image_width": 80})";
    const SynthSpec spec = synth_spec_from_json_file(dir / "spec.json");
    CHECK(spec.seed == 12);
    CHECK(spec.box_pairs == 3);
    CHECK(spec.image_width == 80);
    CHECK(spec.image_height == 120);  // untouched default
  }
  SUBCASE("unknown keys are an error") {
    std::ofstream(dir / "bad.json") << R"({"seed": 12, "boxpairs": 3})";
    CHECK_THROWS(synth_spec_from_json_file(dir / "bad.json"));
  }
  SUBCASE("invalid values are an error") {
    std::ofstream(dir / "neg.json") << R"({"camera_count": 0})";
    CHECK_THROWS(synth_spec_from_json_file(dir / "neg.json"));
  }
}

TEST_CASE("validate_synth_spec rejects degenerate rooms") {
  SynthSpec spec;
  CHECK_NOTHROW(validate_synth_spec(spec));

  SUBCASE("nonpositive extent") {
    spec.room_width = 0;
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("no box pairs") {
    spec.box_pairs = 0;
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("no cameras") {
    spec.camera_count = 0;
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("quantization coarser than the depth tolerance") {
    spec.depth_scale = 50;  // 0.5 / 50 = 0.01 >= delta / 10
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("camera ring outside the room") {
    spec.camera_radius_scale = 0.49;  // within the clearance of the walls
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("cameras not above the boxes") {
    spec.camera_height = 1.5;  // below box top + box size + clearance
    CHECK_THROWS(validate_synth_spec(spec));
  }
  SUBCASE("gap narrower than the clearance") {
    spec.pair_gap = 0.2;
    CHECK_THROWS(validate_synth_spec(spec));
  }
}
