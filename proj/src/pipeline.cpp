#include "masklift/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>
#include <utility>

#include "masklift/eval.hpp"
#include "masklift/labels.hpp"
#include "masklift/lift.hpp"
#include "masklift/scene_io.hpp"

namespace masklift {

void validate_run_config(const RunConfig& cfg) {
  if (cfg.n_view < 1) {
    fail("run config: n_view must be at least 1");
  }
  if (cfg.delta && !(*cfg.delta > 0 && std::isfinite(*cfg.delta))) {
    fail("run config: delta must be positive and finite");
  }
  if (!(cfg.theta >= 0) || !std::isfinite(cfg.theta)) {
    fail("run config: theta must be non-negative and finite");
  }
  if (std::isnan(cfg.tau)) {
    fail("run config: tau must be a number");
  }
  if (!(cfg.kappa >= 0)) {
    fail("run config: kappa must be non-negative");
  }
  if (!(cfg.eta >= 0 && cfg.eta <= 1)) {
    fail("run config: eta must lie in [0, 1]");
  }
  if (cfg.k_augment < 0) {
    fail("run config: k_augment must be non-negative");
  }
  if (cfg.knn.k < 1) {
    fail("run config: knn k must be at least 1");
  }
  if (!(cfg.knn.temperature > 0) || !std::isfinite(cfg.knn.temperature)) {
    fail("run config: knn temperature must be positive");
  }
  for (const double w : {cfg.weights.seg, cfg.weights.r, cfg.weights.a,
                         cfg.weights.m}) {
    if (!(w >= 0) || !std::isfinite(w)) {
      fail("run config: loss weights must be non-negative and finite");
    }
  }
  if (!(cfg.augment.rotation_max >= 0) ||
      !std::isfinite(cfg.augment.rotation_max)) {
    fail("run config: augment rotation_max must be non-negative");
  }
  if (!(cfg.augment.scale_lo >= 0.5 &&
        cfg.augment.scale_lo <= cfg.augment.scale_hi &&
        cfg.augment.scale_hi <= 2.0)) {
    fail("run config: augment scale range must lie within [0.5, 2.0]");
  }
  if (!(cfg.augment.translation_max >= 0) ||
      !std::isfinite(cfg.augment.translation_max)) {
    fail("run config: augment translation_max must be non-negative");
  }
  if (!(cfg.augment.jitter_sigma >= 0) ||
      !std::isfinite(cfg.augment.jitter_sigma)) {
    fail("run config: augment jitter_sigma must be non-negative");
  }
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json doc;
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& path : cfg.scenes) {
    scenes.push_back(path.string());
  }
  doc["scenes"] = std::move(scenes);
  doc["out_dir"] = cfg.out_dir.string();
  doc["n_view"] = cfg.n_view;
  doc["delta"] = cfg.delta ? nlohmann::json(*cfg.delta)
                           : nlohmann::json(nullptr);
  doc["theta"] = cfg.theta;
  doc["tau"] = cfg.tau;
  doc["kappa"] = cfg.kappa;
  doc["eta"] = cfg.eta;
  doc["k_augment"] = cfg.k_augment;
  doc["seed"] = cfg.seed;
  doc["weights"] = {{"seg", cfg.weights.seg},
                    {"r", cfg.weights.r},
                    {"a", cfg.weights.a},
                    {"m", cfg.weights.m}};
  doc["knn"] = {{"k", cfg.knn.k}, {"temperature", cfg.knn.temperature}};
  doc["augment"] = {{"rotation_max", cfg.augment.rotation_max},
                    {"scale_lo", cfg.augment.scale_lo},
                    {"scale_hi", cfg.augment.scale_hi},
                    {"translation_max", cfg.augment.translation_max},
                    {"jitter_sigma", cfg.augment.jitter_sigma}};
  return doc;
}

void apply_config_json(const nlohmann::json& doc, RunConfig& cfg) {
  if (!doc.is_object()) {
    fail("run config: expected a JSON object");
  }
  nlohmann::json rest = doc;
  const auto take_real = [&rest](const char* key, double& field) {
    if (rest.contains(key)) {
      field = rest[key].get<double>();
      rest.erase(key);
    }
  };
  const auto take_int = [&rest](const char* key, int& field) {
    if (rest.contains(key)) {
      field = rest[key].get<int>();
      rest.erase(key);
    }
  };
  if (rest.contains("scenes")) {
    cfg.scenes.clear();
    for (const auto& entry : rest["scenes"]) {
      cfg.scenes.emplace_back(entry.get<std::string>());
    }
    rest.erase("scenes");
  }
  if (rest.contains("out_dir")) {
    cfg.out_dir = rest["out_dir"].get<std::string>();
    rest.erase("out_dir");
  }
  take_int("n_view", cfg.n_view);
  if (rest.contains("delta")) {
    if (rest["delta"].is_null()) {
      cfg.delta.reset();
    } else {
      cfg.delta = rest["delta"].get<double>();
    }
    rest.erase("delta");
  }
  take_real("theta", cfg.theta);
  take_real("tau", cfg.tau);
  take_real("kappa", cfg.kappa);
  take_real("eta", cfg.eta);
  take_int("k_augment", cfg.k_augment);
  if (rest.contains("seed")) {
    cfg.seed = rest["seed"].get<std::uint64_t>();
    rest.erase("seed");
  }
  if (rest.contains("weights")) {
    nlohmann::json sub = rest["weights"];
    const auto take = [&sub](const char* key, double& field) {
      if (sub.contains(key)) {
        field = sub[key].get<double>();
        sub.erase(key);
      }
    };
    take("seg", cfg.weights.seg);
    take("r", cfg.weights.r);
    take("a", cfg.weights.a);
    take("m", cfg.weights.m);
    if (!sub.empty()) {
      fail("run config: unknown key 'weights." + sub.begin().key() + "'");
    }
    rest.erase("weights");
  }
  if (rest.contains("knn")) {
    nlohmann::json sub = rest["knn"];
    if (sub.contains("k")) {
      cfg.knn.k = sub["k"].get<int>();
      sub.erase("k");
    }
    if (sub.contains("temperature")) {
      cfg.knn.temperature = sub["temperature"].get<double>();
      sub.erase("temperature");
    }
    if (!sub.empty()) {
      fail("run config: unknown key 'knn." + sub.begin().key() + "'");
    }
    rest.erase("knn");
  }
  if (rest.contains("augment")) {
    nlohmann::json sub = rest["augment"];
    const auto take = [&sub](const char* key, double& field) {
      if (sub.contains(key)) {
        field = sub[key].get<double>();
        sub.erase(key);
      }
    };
    take("rotation_max", cfg.augment.rotation_max);
    take("scale_lo", cfg.augment.scale_lo);
    take("scale_hi", cfg.augment.scale_hi);
    take("translation_max", cfg.augment.translation_max);
    take("jitter_sigma", cfg.augment.jitter_sigma);
    if (!sub.empty()) {
      fail("run config: unknown key 'augment." + sub.begin().key() + "'");
    }
    rest.erase("augment");
  }
  if (!rest.empty()) {
    fail("run config: unknown key '" + rest.begin().key() + "'");
  }
}

void apply_config_file(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) {
    fail("run config: cannot open " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("run config: invalid JSON in " + path.string() + ": " + e.what());
  }
  apply_config_json(doc, cfg);
}

std::string scene_name_from_path(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  if (name.empty() || name == ".") {
    name = path.parent_path().filename().string();
  }
  if (name.empty()) {
    fail("cannot derive a scene name from '" + path.string() + "'");
  }
  return name;
}

std::uint64_t scene_seed(std::uint64_t run_seed,
                         const std::string& scene_name) {
  std::uint64_t hash = 1469598103934665603ULL;
  const auto absorb = [&hash](unsigned char byte) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  };
  for (int shift = 0; shift < 64; shift += 8) {
    absorb(static_cast<unsigned char>((run_seed >> shift) & 0xff));
  }
  for (const char c : scene_name) {
    absorb(static_cast<unsigned char>(c));
  }
  return hash;
}

namespace {

nlohmann::json stats_json(const LabelStats& stats, bool have_gt) {
  nlohmann::json out;
  out["count"] = static_cast<std::int64_t>(stats.count);
  out["accuracy"] = have_gt ? nlohmann::json(stats.accuracy)
                            : nlohmann::json(nullptr);
  return out;
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    fail("cannot write " + path.string());
  }
  out << doc.dump(2) << "\n";
  if (!out) {
    fail("write failed for " + path.string());
  }
}

}  // namespace

MaskSet3D lift_scene(const SceneBundle& scene, int n_view, double delta,
                     double theta) {
  const std::vector<Eigen::Index> selected =
      sample_views(static_cast<Eigen::Index>(scene.views.size()), n_view);
  std::vector<MaskSet3DView> lifted;
  lifted.reserve(selected.size());
  for (const Eigen::Index idx : selected) {
    const ViewObservation& view = scene.views[static_cast<std::size_t>(idx)];
    const LinkMatrix link = build_link_matrix(
        scene.cloud, view.intrinsics, view.pose, view.depth, delta);
    lifted.push_back(backproject_masks(view.mask2d, link));
  }
  return merge_mask_sets(lifted, theta);
}

nlohmann::json process_scene(const SceneBundle& scene, const std::string& name,
                             const RunConfig& cfg,
                             const std::filesystem::path& scene_out) {
  validate_run_config(cfg);
  const double delta_used = cfg.delta ? *cfg.delta : scene.meta.delta_depth;
  std::filesystem::create_directories(scene_out);

  const MaskSet3D merged = lift_scene(scene, cfg.n_view, delta_used,
                                      cfg.theta);
  save_mask_set(merged, scene_out / "mask3d.bin");
  save_mask_provenance(merged, scene_out / "mask3d.prov.json");

  const LabelArray init = init_labels(scene.sparse, merged);
  save_labels(init, scene_out / "init.labels");

  const PredictionStack stack =
      build_stack(scene.cloud, init, scene.meta.num_classes, cfg.k_augment,
                  scene_seed(cfg.seed, name), cfg.augment, cfg.knn);
  save_stack(stack, scene_out / "stack.bin");

  const ReliabilitySplit split = split_reliable(stack, cfg.tau, cfg.kappa);
  save_labels(split.hard, scene_out / "reliable.labels");

  PropagateStats pstats;
  const LabelArray expanded = propagate(scene.sparse, split.hard, merged,
                                        PropagationConfig{cfg.eta}, &pstats);
  save_labels(expanded, scene_out / "expanded.labels");

  const LossReport loss =
      total_loss(scene.sparse, expanded, split, stack, cfg.weights);

  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < merged.point_count(); ++i) {
    if (merged.membership.col(i).any()) {
      ++covered;
    }
  }

  nlohmann::json report;
  report["schema_version"] = 1;
  report["status"] = "ok";
  report["name"] = name;
  report["config"] = config_to_json(cfg);
  report["delta_used"] = delta_used;
  nlohmann::json views_used = nlohmann::json::array();
  for (const Eigen::Index idx : sample_views(
           static_cast<Eigen::Index>(scene.views.size()), cfg.n_view)) {
    views_used.push_back(scene.views[static_cast<std::size_t>(idx)].name);
  }
  report["views_used"] = std::move(views_used);
  report["masks"] = {
      {"count", static_cast<std::int64_t>(merged.mask_count())},
      {"covered_points", static_cast<std::int64_t>(covered)},
      {"points", static_cast<std::int64_t>(scene.size())}};

  const bool have_gt = scene.gt.has_value();
  const LabelArray gt_or_ignore =
      have_gt ? *scene.gt : LabelArray::Constant(scene.size(), kIgnoreLabel);
  report["labels"] = {
      {"sparse", stats_json(label_stats(scene.sparse, gt_or_ignore), have_gt)},
      {"init", stats_json(label_stats(init, gt_or_ignore), have_gt)},
      {"reliable",
       stats_json(label_stats(split.hard, gt_or_ignore), have_gt)},
      {"expanded",
       stats_json(label_stats(expanded, gt_or_ignore), have_gt)}};

  report["propagate"] = {
      {"eta", cfg.eta},
      {"reliable_branch_masks",
       static_cast<std::int64_t>(pstats.reliable_branch_masks)},
      {"annotation_branch_masks",
       static_cast<std::int64_t>(pstats.annotation_branch_masks)},
      {"untouched_masks",
       static_cast<std::int64_t>(pstats.untouched_masks)}};

  report["loss"] = {
      {"value", loss.value},
      {"seg_term", loss.seg_term},
      {"r_term", loss.r_term},
      {"a_term", loss.a_term},
      {"m_term", loss.m_term},
      {"gradient_norm", loss.gradient.norm()},
      {"labeled_y", static_cast<std::int64_t>(loss.labeled_y)},
      {"reliable_points", static_cast<std::int64_t>(loss.reliable_points)},
      {"ambiguous_points", static_cast<std::int64_t>(loss.ambiguous_points)},
      {"labeled_ytilde", static_cast<std::int64_t>(loss.labeled_ytilde)}};

  if (have_gt) {
    const IoUReport iou = miou(expanded, *scene.gt, scene.meta.num_classes);
    nlohmann::json per_class = nlohmann::json::array();
    for (Eigen::Index c = 0; c < iou.per_class.size(); ++c) {
      per_class.push_back(std::isnan(iou.per_class[c])
                              ? nlohmann::json(nullptr)
                              : nlohmann::json(iou.per_class[c]));
    }
    report["miou"] = {
        {"mean", iou.mean},
        {"per_class", std::move(per_class)},
        {"evaluated_points",
         static_cast<std::int64_t>(iou.evaluated_points)}};
  } else {
    report["miou"] = nullptr;
  }

  write_json(report, scene_out / "scene_report.json");
  return report;
}

RunOutcome run_pipeline(const RunConfig& cfg, int jobs) {
  validate_run_config(cfg);
  if (jobs < 1) {
    fail("run_pipeline: jobs must be at least 1");
  }
  if (cfg.out_dir.empty()) {
    fail("run_pipeline: output directory not set");
  }

  std::vector<std::string> names;
  names.reserve(cfg.scenes.size());
  std::map<std::string, std::filesystem::path> seen;
  for (const auto& path : cfg.scenes) {
    const std::string name = scene_name_from_path(path);
    const auto [it, inserted] = seen.emplace(name, path);
    if (!inserted) {
      fail("run_pipeline: scene name '" + name + "' appears twice (" +
           it->second.string() + " and " + path.string() + ")");
    }
    names.push_back(name);
  }

  std::filesystem::create_directories(cfg.out_dir / "scenes");

  const std::size_t n = cfg.scenes.size();
  std::vector<nlohmann::json> scene_reports(n);
  std::vector<char> scene_failed(n, 0);
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) {
        return;
      }
      try {
        const SceneBundle scene = load_scene(cfg.scenes[i]);
        scene_reports[i] = process_scene(scene, names[i], cfg,
                                         cfg.out_dir / "scenes" / names[i]);
      } catch (const std::exception& e) {
        scene_failed[i] = 1;
        scene_reports[i] = {{"status", "failed"},
                            {"name", names[i]},
                            {"error", e.what()}};
      }
    }
  };
  if (n > 0) {
    const std::size_t worker_count =
        std::min(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }

  nlohmann::json report;
  report["schema_version"] = 1;
  report["config"] = config_to_json(cfg);
  nlohmann::json scenes = nlohmann::json::array();
  for (const nlohmann::json& entry : scene_reports) {
    scenes.push_back(entry);
  }
  report["scenes"] = std::move(scenes);

  nlohmann::json failed_names = nlohmann::json::array();
  std::size_t ok_count = 0;
  double loss_sum = 0;
  double miou_sum = 0;
  std::size_t miou_count = 0;
  const char* kinds[] = {"sparse", "init", "reliable", "expanded"};
  double count_sum[4] = {0, 0, 0, 0};
  double accuracy_sum[4] = {0, 0, 0, 0};
  std::size_t accuracy_n[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    if (scene_failed[i]) {
      failed_names.push_back(names[i]);
      continue;
    }
    ++ok_count;
    const nlohmann::json& entry = scene_reports[i];
    loss_sum += entry["loss"]["value"].get<double>();
    if (!entry["miou"].is_null()) {
      miou_sum += entry["miou"]["mean"].get<double>();
      ++miou_count;
    }
    for (int k = 0; k < 4; ++k) {
      const nlohmann::json& stats = entry["labels"][kinds[k]];
      count_sum[k] += stats["count"].get<double>();
      if (stats["accuracy"].is_number()) {
        accuracy_sum[k] += stats["accuracy"].get<double>();
        ++accuracy_n[k];
      }
    }
  }
  nlohmann::json aggregate;
  aggregate["scene_count"] = n;
  aggregate["succeeded"] = ok_count;
  aggregate["failed"] = std::move(failed_names);
  aggregate["mean_loss"] =
      ok_count ? nlohmann::json(loss_sum / static_cast<double>(ok_count))
               : nlohmann::json(nullptr);
  aggregate["mean_miou"] =
      miou_count
          ? nlohmann::json(miou_sum / static_cast<double>(miou_count))
          : nlohmann::json(nullptr);
  for (int k = 0; k < 4; ++k) {
    aggregate[std::string("mean_") + kinds[k] + "_count"] =
        ok_count
            ? nlohmann::json(count_sum[k] / static_cast<double>(ok_count))
            : nlohmann::json(nullptr);
    aggregate[std::string("mean_") + kinds[k] + "_accuracy"] =
        accuracy_n[k] ? nlohmann::json(accuracy_sum[k] /
                                       static_cast<double>(accuracy_n[k]))
                      : nlohmann::json(nullptr);
  }
  report["aggregate"] = std::move(aggregate);

  write_json(report, cfg.out_dir / "run_report.json");

  RunOutcome outcome;
  outcome.report = std::move(report);
  outcome.any_failed = ok_count != n;
  return outcome;
}

}  // namespace masklift
