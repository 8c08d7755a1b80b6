#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "masklift/eval.hpp"
#include "masklift/labels.hpp"
#include "masklift/lift.hpp"
#include "masklift/pipeline.hpp"
#include "masklift/scene_io.hpp"
#include "masklift/synth.hpp"

namespace {

void print_or_write(const nlohmann::json& doc,
                    const std::filesystem::path& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream file(out);
  if (!file) {
    masklift::fail("cannot write " + out.string());
  }
  file << doc.dump(2) << "\n";
}

void register_run(CLI::App& app, int& exit_code, int argc, char** argv) {
  struct RunCli {
    masklift::RunConfig cfg;
    std::string config_path;
    std::vector<std::string> scenes;
    int jobs = 1;
  };
  auto cli = std::make_shared<RunCli>();

  // The config file must apply before flag and env parsing so that both
  // override it; CLI11 assigns bound variables only when a value arrives.
  if (argc > 1 && std::string(argv[1]) == "run") {
    for (int i = 2; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc) {
        masklift::apply_config_file(argv[i + 1], cli->cfg);
        break;
      }
      if (arg.rfind("--config=", 0) == 0) {
        masklift::apply_config_file(arg.substr(9), cli->cfg);
        break;
      }
    }
  }

  CLI::App* cmd =
      app.add_subcommand("run", "Run the full pipeline over a scene batch");
  cmd->add_option("--config", cli->config_path,
                  "JSON config file; flags and MASKLIFT_* variables override "
                  "its values");
  cmd->add_option("--scene", cli->scenes,
                  "Scene directory (repeatable; replaces the config list)");
  cmd->add_option("--out", cli->cfg.out_dir, "Output directory")
      ->envname("MASKLIFT_OUT_DIR");
  cmd->add_option("--n-view", cli->cfg.n_view, "Views sampled per scene")
      ->envname("MASKLIFT_N_VIEW");
  cmd->add_option("--delta", cli->cfg.delta,
                  "Depth tolerance, meters (default: each scene's meta)")
      ->envname("MASKLIFT_DELTA");
  cmd->add_option("--theta", cli->cfg.theta, "Mask merge overlap threshold")
      ->envname("MASKLIFT_THETA");
  cmd->add_option("--tau", cli->cfg.tau, "Reliability mean threshold")
      ->envname("MASKLIFT_TAU");
  cmd->add_option("--kappa", cli->cfg.kappa, "Reliability variance threshold")
      ->envname("MASKLIFT_KAPPA");
  cmd->add_option("--eta", cli->cfg.eta, "Propagation proportion threshold")
      ->envname("MASKLIFT_ETA");
  cmd->add_option("--k-augment", cli->cfg.k_augment,
                  "Augmented stack slices")
      ->envname("MASKLIFT_K_AUGMENT");
  cmd->add_option("--seed", cli->cfg.seed, "Run seed")
      ->envname("MASKLIFT_SEED");
  cmd->add_option("--knn-k", cli->cfg.knn.k, "Neighbors in the predictor")
      ->envname("MASKLIFT_KNN_K");
  cmd->add_option("--knn-temperature", cli->cfg.knn.temperature,
                  "Distance temperature of the predictor")
      ->envname("MASKLIFT_KNN_TEMPERATURE");
  cmd->add_option("--lambda-seg", cli->cfg.weights.seg,
                  "Weight of the annotation term")
      ->envname("MASKLIFT_LAMBDA_SEG");
  cmd->add_option("--lambda-r", cli->cfg.weights.r,
                  "Weight of the reliable term")
      ->envname("MASKLIFT_LAMBDA_R");
  cmd->add_option("--lambda-a", cli->cfg.weights.a,
                  "Weight of the ambiguous term")
      ->envname("MASKLIFT_LAMBDA_A");
  cmd->add_option("--lambda-m", cli->cfg.weights.m,
                  "Weight of the noise-robust term")
      ->envname("MASKLIFT_LAMBDA_M");
  cmd->add_option("--aug-rotation-max", cli->cfg.augment.rotation_max,
                  "Max augmentation rotation per axis, radians")
      ->envname("MASKLIFT_AUG_ROTATION_MAX");
  cmd->add_option("--aug-scale-lo", cli->cfg.augment.scale_lo,
                  "Augmentation scale lower bound")
      ->envname("MASKLIFT_AUG_SCALE_LO");
  cmd->add_option("--aug-scale-hi", cli->cfg.augment.scale_hi,
                  "Augmentation scale upper bound")
      ->envname("MASKLIFT_AUG_SCALE_HI");
  cmd->add_option("--aug-translation-max", cli->cfg.augment.translation_max,
                  "Max augmentation translation per axis, meters")
      ->envname("MASKLIFT_AUG_TRANSLATION_MAX");
  cmd->add_option("--aug-jitter-sigma", cli->cfg.augment.jitter_sigma,
                  "Augmentation jitter stddev, meters")
      ->envname("MASKLIFT_AUG_JITTER_SIGMA");
  cmd->add_option("--jobs", cli->jobs, "Scenes processed in parallel")
      ->envname("MASKLIFT_JOBS");

  cmd->callback([cli, &exit_code]() {
    if (!cli->scenes.empty()) {
      cli->cfg.scenes.assign(cli->scenes.begin(), cli->scenes.end());
    }
    const masklift::RunOutcome outcome =
        masklift::run_pipeline(cli->cfg, cli->jobs);
    const nlohmann::json& agg = outcome.report["aggregate"];
    std::cout << agg["succeeded"] << "/" << agg["scene_count"]
              << " scenes succeeded; report: "
              << (cli->cfg.out_dir / "run_report.json").string() << "\n";
    exit_code = outcome.any_failed ? 1 : 0;
  });
}

void register_synth(CLI::App& app) {
  struct SynthCli {
    std::string spec_path;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    int sparse_n = 0;
    bool sparse_otoc = false;
    std::uint64_t sparse_seed = 1;
  };
  auto cli = std::make_shared<SynthCli>();
  CLI::App* cmd = app.add_subcommand(
      "synth", "Generate a synthetic scene directory with ground truth");
  cmd->add_option("--spec", cli->spec_path, "Scene family JSON spec");
  cmd->add_option("--out", cli->out, "Scene directory to create")->required();
  cmd->add_option("--seed", cli->seed, "Overrides the spec's seed");
  CLI::Option* n_opt = cmd->add_option(
      "--sparse-n", cli->sparse_n, "Annotate this many uniform random points");
  CLI::Option* otoc_opt = cmd->add_flag(
      "--sparse-otoc", cli->sparse_otoc, "Annotate one point per object");
  n_opt->excludes(otoc_opt);
  otoc_opt->excludes(n_opt);
  cmd->add_option("--sparse-seed", cli->sparse_seed,
                  "Seed of the sparse annotation draw");

  cmd->callback([cli]() {
    masklift::SynthSpec spec;
    if (!cli->spec_path.empty()) {
      spec = masklift::synth_spec_from_json_file(cli->spec_path);
    }
    if (cli->seed) {
      spec.seed = *cli->seed;
    }
    masklift::SynthScene synth = masklift::generate_scene(spec);
    if (cli->sparse_n > 0) {
      synth.scene.sparse = masklift::sample_sparse(
          *synth.scene.gt, masklift::SparseScheme::kFixedCount, cli->sparse_n,
          cli->sparse_seed, synth.object_ids);
    } else if (cli->sparse_otoc) {
      synth.scene.sparse = masklift::sample_sparse(
          *synth.scene.gt, masklift::SparseScheme::kOnePerObject, 0,
          cli->sparse_seed, synth.object_ids);
    }
    masklift::save_scene(synth.scene, cli->out);
    masklift::save_labels(synth.object_ids, cli->out / "objects.labels");
    std::cout << "wrote " << synth.scene.size() << " points, "
              << synth.object_count << " objects, "
              << synth.scene.views.size() << " views to "
              << cli->out.string() << "\n";
  });
}

void register_lift(CLI::App& app) {
  struct LiftCli {
    std::filesystem::path scene;
    std::filesystem::path out_mask;
    std::filesystem::path out_prov;
    int n_view = 5;
    std::optional<double> delta;
    double theta = 0.3;
  };
  auto cli = std::make_shared<LiftCli>();
  CLI::App* cmd = app.add_subcommand(
      "lift", "Backproject and merge a scene's 2D masks into 3D masks");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--out-mask", cli->out_mask, "Output mask3d.bin")
      ->required();
  cmd->add_option("--out-prov", cli->out_prov, "Output provenance JSON");
  cmd->add_option("--n-view", cli->n_view, "Views sampled per scene");
  cmd->add_option("--delta", cli->delta,
                  "Depth tolerance, meters (default: the scene's meta)");
  cmd->add_option("--theta", cli->theta, "Mask merge overlap threshold");

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    const double delta =
        cli->delta ? *cli->delta : scene.meta.delta_depth;
    const masklift::MaskSet3D merged =
        masklift::lift_scene(scene, cli->n_view, delta, cli->theta);
    masklift::save_mask_set(merged, cli->out_mask);
    if (!cli->out_prov.empty()) {
      masklift::save_mask_provenance(merged, cli->out_prov);
    }
  });
}

void register_init_labels(CLI::App& app) {
  struct InitCli {
    std::filesystem::path scene;
    std::filesystem::path mask;
    std::filesystem::path out;
  };
  auto cli = std::make_shared<InitCli>();
  CLI::App* cmd = app.add_subcommand(
      "init-labels", "Expand a scene's sparse annotations onto 3D masks");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--mask", cli->mask, "mask3d.bin from the lift stage")
      ->required();
  cmd->add_option("--out", cli->out, "Output label file")->required();

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    const masklift::MaskSet3D masks = masklift::load_mask_set(cli->mask);
    masklift::save_labels(masklift::init_labels(scene.sparse, masks),
                          cli->out);
  });
}

void register_select_reliable(CLI::App& app) {
  struct SelectCli {
    std::filesystem::path scene;
    std::filesystem::path seeds;
    std::filesystem::path stack_file;
    std::filesystem::path out_hard;
    std::filesystem::path out_stack;
    double tau = 0.9;
    double kappa = 0.01;
    int k_augment = 2;
    std::uint64_t seed = 1;
    masklift::KnnConfig knn;
    masklift::AugmentRanges augment;
  };
  auto cli = std::make_shared<SelectCli>();
  CLI::App* cmd = app.add_subcommand(
      "select-reliable",
      "Build the augmented prediction stack and split points by reliability");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--seeds", cli->seeds,
                  "Seed labels for the predictor (init-labels output)");
  cmd->add_option("--stack-file", cli->stack_file,
                  "Reuse a saved stack instead of predicting");
  cmd->add_option("--out-hard", cli->out_hard,
                  "Output labels: argmax where reliable, -1 elsewhere")
      ->required();
  cmd->add_option("--out-stack", cli->out_stack, "Save the stack here");
  cmd->add_option("--tau", cli->tau, "Reliability mean threshold");
  cmd->add_option("--kappa", cli->kappa, "Reliability variance threshold");
  cmd->add_option("--k-augment", cli->k_augment, "Augmented stack slices");
  cmd->add_option("--seed", cli->seed,
                  "Run seed; the scene's stream derives from it and the "
                  "scene name");
  cmd->add_option("--knn-k", cli->knn.k, "Neighbors in the predictor");
  cmd->add_option("--knn-temperature", cli->knn.temperature,
                  "Distance temperature of the predictor");
  cmd->add_option("--aug-rotation-max", cli->augment.rotation_max,
                  "Max augmentation rotation per axis, radians");
  cmd->add_option("--aug-scale-lo", cli->augment.scale_lo,
                  "Augmentation scale lower bound");
  cmd->add_option("--aug-scale-hi", cli->augment.scale_hi,
                  "Augmentation scale upper bound");
  cmd->add_option("--aug-translation-max", cli->augment.translation_max,
                  "Max augmentation translation per axis, meters");
  cmd->add_option("--aug-jitter-sigma", cli->augment.jitter_sigma,
                  "Augmentation jitter stddev, meters");

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    masklift::PredictionStack stack;
    if (!cli->stack_file.empty()) {
      stack = masklift::load_stack(cli->stack_file);
    } else {
      if (cli->seeds.empty()) {
        masklift::fail("select-reliable: pass --seeds or --stack-file");
      }
      const masklift::LabelArray seeds = masklift::load_labels(cli->seeds);
      masklift::validate_labels(seeds, scene.meta.num_classes, scene.size(),
                                "seed labels");
      stack = masklift::build_stack(
          scene.cloud, seeds, scene.meta.num_classes, cli->k_augment,
          masklift::scene_seed(cli->seed,
                               masklift::scene_name_from_path(cli->scene)),
          cli->augment, cli->knn);
    }
    if (!cli->out_stack.empty()) {
      masklift::save_stack(stack, cli->out_stack);
    }
    const masklift::ReliabilitySplit split =
        masklift::split_reliable(stack, cli->tau, cli->kappa);
    masklift::save_labels(split.hard, cli->out_hard);
  });
}

void register_propagate(CLI::App& app) {
  struct PropCli {
    std::filesystem::path scene;
    std::filesystem::path mask;
    std::filesystem::path reliable;
    std::filesystem::path out;
    double eta = 0.7;
  };
  auto cli = std::make_shared<PropCli>();
  CLI::App* cmd = app.add_subcommand(
      "propagate",
      "Fuse annotations and reliable pseudo labels over the 3D masks");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--mask", cli->mask, "mask3d.bin from the lift stage")
      ->required();
  cmd->add_option("--reliable", cli->reliable,
                  "Reliable labels (select-reliable output)")
      ->required();
  cmd->add_option("--out", cli->out, "Output label file")->required();
  cmd->add_option("--eta", cli->eta, "Propagation proportion threshold");

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    const masklift::MaskSet3D masks = masklift::load_mask_set(cli->mask);
    const masklift::LabelArray reliable =
        masklift::load_labels(cli->reliable);
    masklift::validate_labels(reliable, scene.meta.num_classes, scene.size(),
                              "reliable labels");
    masklift::save_labels(
        masklift::propagate(scene.sparse, reliable, masks,
                            masklift::PropagationConfig{cli->eta}),
        cli->out);
  });
}

void register_losses(CLI::App& app) {
  struct LossCli {
    std::filesystem::path scene;
    std::filesystem::path stack;
    std::filesystem::path expanded;
    std::filesystem::path out;
    double tau = 0.9;
    double kappa = 0.01;
    masklift::LossWeights weights;
  };
  auto cli = std::make_shared<LossCli>();
  CLI::App* cmd = app.add_subcommand(
      "losses", "Evaluate the weighted training loss on saved artifacts");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--stack", cli->stack, "stack.bin")->required();
  cmd->add_option("--expanded", cli->expanded,
                  "Expanded labels (propagate output)")
      ->required();
  cmd->add_option("--tau", cli->tau, "Reliability mean threshold");
  cmd->add_option("--kappa", cli->kappa, "Reliability variance threshold");
  cmd->add_option("--lambda-seg", cli->weights.seg,
                  "Weight of the annotation term");
  cmd->add_option("--lambda-r", cli->weights.r,
                  "Weight of the reliable term");
  cmd->add_option("--lambda-a", cli->weights.a,
                  "Weight of the ambiguous term");
  cmd->add_option("--lambda-m", cli->weights.m,
                  "Weight of the noise-robust term");
  cmd->add_option("--out", cli->out, "Report file (default: stdout)");

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    const masklift::PredictionStack stack =
        masklift::load_stack(cli->stack);
    if (stack.point_count() != scene.size() ||
        stack.class_count() != scene.meta.num_classes) {
      masklift::fail("losses: stack shape " +
                     std::to_string(stack.point_count()) + "x" +
                     std::to_string(stack.class_count()) +
                     " does not match the scene");
    }
    const masklift::LabelArray expanded =
        masklift::load_labels(cli->expanded);
    masklift::validate_labels(expanded, scene.meta.num_classes, scene.size(),
                              "expanded labels");
    const masklift::ReliabilitySplit split =
        masklift::split_reliable(stack, cli->tau, cli->kappa);
    const masklift::LossReport report = masklift::total_loss(
        scene.sparse, expanded, split, stack, cli->weights);
    nlohmann::json doc;
    doc["value"] = report.value;
    doc["seg_term"] = report.seg_term;
    doc["r_term"] = report.r_term;
    doc["a_term"] = report.a_term;
    doc["m_term"] = report.m_term;
    doc["gradient_norm"] = report.gradient.norm();
    doc["labeled_y"] = static_cast<std::int64_t>(report.labeled_y);
    doc["reliable_points"] =
        static_cast<std::int64_t>(report.reliable_points);
    doc["ambiguous_points"] =
        static_cast<std::int64_t>(report.ambiguous_points);
    doc["labeled_ytilde"] =
        static_cast<std::int64_t>(report.labeled_ytilde);
    doc["tau"] = cli->tau;
    doc["kappa"] = cli->kappa;
    doc["weights"] = {{"seg", cli->weights.seg},
                      {"r", cli->weights.r},
                      {"a", cli->weights.a},
                      {"m", cli->weights.m}};
    print_or_write(doc, cli->out);
  });
}

void register_eval(CLI::App& app) {
  struct EvalCli {
    std::filesystem::path scene;
    std::filesystem::path pred;
    std::filesystem::path out;
  };
  auto cli = std::make_shared<EvalCli>();
  CLI::App* cmd = app.add_subcommand(
      "eval", "Score a label file against a scene's ground truth");
  cmd->add_option("--scene", cli->scene, "Scene directory")->required();
  cmd->add_option("--pred", cli->pred, "Label file to score")->required();
  cmd->add_option("--out", cli->out, "Report file (default: stdout)");

  cmd->callback([cli]() {
    const masklift::SceneBundle scene = masklift::load_scene(cli->scene);
    if (!scene.gt) {
      masklift::fail("eval: scene has no gt.labels");
    }
    const masklift::LabelArray pred = masklift::load_labels(cli->pred);
    masklift::validate_labels(pred, scene.meta.num_classes, scene.size(),
                              "pred labels");
    const masklift::IoUReport iou =
        masklift::miou(pred, *scene.gt, scene.meta.num_classes);
    const masklift::LabelStats stats = masklift::label_stats(pred, *scene.gt);
    nlohmann::json per_class = nlohmann::json::array();
    for (Eigen::Index c = 0; c < iou.per_class.size(); ++c) {
      per_class.push_back(std::isnan(iou.per_class[c])
                              ? nlohmann::json(nullptr)
                              : nlohmann::json(iou.per_class[c]));
    }
    nlohmann::json doc;
    doc["miou"] = {{"mean", iou.mean},
                   {"per_class", std::move(per_class)},
                   {"evaluated_points",
                    static_cast<std::int64_t>(iou.evaluated_points)}};
    doc["labels"] = {{"count", static_cast<std::int64_t>(stats.count)},
                     {"accuracy", stats.accuracy}};
    doc["num_classes"] = scene.meta.num_classes;
    print_or_write(doc, cli->out);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifts 2D segmentation masks into 3D point-cloud masks and "
               "expands sparse annotations with reliability-gated pseudo "
               "labels"};
  app.require_subcommand(1);
  int exit_code = 0;
  try {
    register_run(app, exit_code, argc, argv);
    register_synth(app);
    register_lift(app);
    register_init_labels(app);
    register_select_reliable(app);
    register_propagate(app);
    register_losses(app);
    register_eval(app);
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
