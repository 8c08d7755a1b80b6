#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "masklift/losses.hpp"
#include "masklift/reliability.hpp"
#include "masklift/scene.hpp"

namespace masklift {

/// Resolved parameters of one batch run. delta unset means every scene uses
/// the tolerance recorded in its own meta.json.
struct RunConfig {
  std::vector<std::filesystem::path> scenes;
  std::filesystem::path out_dir;
  int n_view = 5;
  std::optional<double> delta;
  double theta = 0.3;
  double tau = 0.9;
  double kappa = 0.01;
  double eta = 0.7;
  int k_augment = 2;
  std::uint64_t seed = 1;
  LossWeights weights;
  KnnConfig knn;
  AugmentRanges augment;
};

void validate_run_config(const RunConfig& cfg);

/// Full echo of every field with defaults materialized; delta serializes as
/// null when unset. Keys are emitted in sorted order, so equal configs give
/// byte-equal JSON.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Applies the keys present in doc onto cfg. Unknown keys, at any level, are
/// an error.
void apply_config_json(const nlohmann::json& doc, RunConfig& cfg);
void apply_config_file(const std::filesystem::path& path, RunConfig& cfg);

/// Scene name = last path component, ignoring a trailing slash.
std::string scene_name_from_path(const std::filesystem::path& path);

/// Per-scene seed: FNV-1a over the run seed's bytes then the scene name.
/// The stream a scene sees depends only on (run seed, name), never on batch
/// order or worker count.
std::uint64_t scene_seed(std::uint64_t run_seed, const std::string& scene_name);

/// The lift stage: sample n_view views, link each to the cloud with the
/// given depth tolerance, backproject its 2D masks, and merge across views.
MaskSet3D lift_scene(const SceneBundle& scene, int n_view, double delta,
                     double theta);

/// Runs one scene through view sampling, lifting, merging, label
/// initialization, the prediction stack, the reliability split, propagation,
/// the loss, and evaluation. Writes mask3d.bin, mask3d.prov.json,
/// init.labels, stack.bin, reliable.labels, expanded.labels, and
/// scene_report.json under scene_out and returns the report.
nlohmann::json process_scene(const SceneBundle& scene, const std::string& name,
                             const RunConfig& cfg,
                             const std::filesystem::path& scene_out);

struct RunOutcome {
  nlohmann::json report;
  bool any_failed = false;
};

/// Processes every scene, recording failures instead of aborting the batch,
/// writes run_report.json under cfg.out_dir, and aggregates per-scene
/// statistics in input order. jobs bounds the worker threads and leaves no
/// trace in the report.
RunOutcome run_pipeline(const RunConfig& cfg, int jobs);

}  // namespace masklift
