// Command-line front end: synth, prepare, train, detect, evaluate,
// export-viz. Every flag can also live in a key=value config file passed
// with --config; flags override file values. Exit codes: 0 success, 1 usage
// error, 2 data error, 3 training divergence.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ptcrack/pipeline.hpp"

namespace {

using ptcrack::PlyFormat;

// mirrors the log to <output_dir>/run.log once the directory exists
int run_logged(const std::string& output_dir, const std::function<int(std::ostream&)>& fn) {
  std::ostringstream captured;
  const int rc = fn(captured);
  std::cout << captured.str();
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (!ec) {
    std::ofstream log(std::filesystem::path(output_dir) / "run.log",
                      std::ios::trunc);
    log << captured.str();
  }
  return rc;
}

void add_format_option(CLI::App* cmd, PlyFormat& format) {
  cmd->add_option_function<std::string>(
         "--ply-format",
         [&format](const std::string& v) {
           if (v == "ascii") format = PlyFormat::ascii;
           else if (v == "binary") format = PlyFormat::binary_little_endian;
           else throw CLI::ValidationError("--ply-format must be ascii or binary");
         },
         "Output PLY encoding: binary (default) or ascii")
      ->default_str("binary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crack instance detection on unstructured 3D surfaces"};
  app.require_subcommand(1);

  ptcrack::SynthOptions synth;
  ptcrack::PrepareOptions prepare;
  ptcrack::TrainOptions train;
  ptcrack::DetectOptions detect;
  ptcrack::EvaluateOptions evaluate;
  ptcrack::ExportVizOptions viz;

  // --- synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  synth_cmd->set_config("--config");
  synth_cmd->add_option("-o,--output-dir", synth.output_dir, "Output directory");
  synth_cmd->add_option("--surfaces", synth.spec.surfaces, "Number of surfaces")
      ->capture_default_str();
  synth_cmd->add_option("--cracks-per-surface", synth.spec.cracks_per_surface,
                        "Cracks carved per surface")
      ->capture_default_str();
  synth_cmd->add_option("--extent", synth.spec.surface.extent_x,
                        "Surface edge length in meters (square)")
      ->capture_default_str();
  synth_cmd->add_option("--density", synth.spec.surface.density, "Points per m^2")
      ->capture_default_str();
  synth_cmd->add_option("--roughness", synth.spec.surface.roughness_amplitude,
                        "Height field amplitude in meters")
      ->capture_default_str();
  synth_cmd->add_option("--octaves", synth.spec.surface.roughness_octaves,
                        "Height field octave count")
      ->capture_default_str();
  synth_cmd->add_option("--roughness-scale", synth.spec.surface.roughness_scale,
                        "Base feature wavelength in meters")
      ->capture_default_str();
  synth_cmd->add_option("--noise-sigma", synth.spec.surface.noise_sigma,
                        "Bounded sensor jitter in meters")
      ->capture_default_str();
  synth_cmd->add_option("--width-min", synth.spec.width_min, "Smallest crack width (m)")
      ->capture_default_str();
  synth_cmd->add_option("--width-max", synth.spec.width_max, "Largest crack width (m)")
      ->capture_default_str();
  synth_cmd->add_option("--length-min", synth.spec.length_min, "Shortest crack (m)")
      ->capture_default_str();
  synth_cmd->add_option("--length-max", synth.spec.length_max, "Longest crack (m)")
      ->capture_default_str();
  synth_cmd->add_option("--keep-ratio", synth.spec.keep_ratio,
                        "Fraction of interior points kept inside cracks")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Random seed")->capture_default_str();
  add_format_option(synth_cmd, synth.format);

  // --- prepare -------------------------------------------------------------
  auto* prepare_cmd =
      app.add_subcommand("prepare", "Split by crack, voxelize, and normalize");
  prepare_cmd->set_config("--config");
  prepare_cmd->add_option("-i,--input", prepare.inputs, "Cloud paths or globs")
      ->required();
  prepare_cmd->add_option("-o,--output-dir", prepare.output_dir, "Output directory");
  prepare_cmd->add_option("-d,--voxel-edge", prepare.voxel.edge, "Voxel edge (m)")
      ->capture_default_str();
  prepare_cmd
      ->add_option("-n,--points-per-voxel", prepare.voxel.points_per_voxel,
                   "Points sampled per voxel")
      ->capture_default_str();
  prepare_cmd
      ->add_option("-s,--stride", prepare.voxel.stride,
                   "Voxel stride for train/val (test always uses the edge)")
      ->capture_default_str();
  prepare_cmd->add_option("--band-width", prepare.band_width,
                          "Negative band around cracks (m)")
      ->capture_default_str();
  prepare_cmd->add_option("--gt-link-distance", prepare.gt_link_distance,
                          "Link distance when instance ids are absent (m)")
      ->capture_default_str();
  prepare_cmd->add_option("--augment-copies", prepare.augment_copies,
                          "Translated copies of each training cloud")
      ->capture_default_str();
  prepare_cmd->add_option("--augment-max-offset", prepare.augment_max_offset,
                          "Largest augmentation translation (m)")
      ->capture_default_str();
  prepare_cmd->add_option("--seed", prepare.seed, "Random seed")->capture_default_str();

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Fit the confidence scorer");
  train_cmd->set_config("--config");
  train_cmd->add_option("-p,--prepare-dir", train.prepare_dir,
                        "Directory written by prepare")
      ->required();
  train_cmd->add_option("-o,--output-dir", train.output_dir, "Output directory");
  train_cmd->add_option("--gamma", train.config.focal_gamma, "Focal loss gamma")
      ->capture_default_str();
  train_cmd->add_option("--alpha", train.config.focal_alpha, "Focal loss alpha")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs, "Training epochs")
      ->capture_default_str();
  train_cmd->add_option("--learning-rate", train.config.learning_rate, "Initial rate")
      ->capture_default_str();
  train_cmd
      ->add_option("--lr-halve-every", train.config.lr_halve_every,
                   "Epochs between halving the rate")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size, "Voxels per batch")
      ->capture_default_str();
  train_cmd->add_option("--dropout", train.config.dropout, "Dropout rate")
      ->capture_default_str();
  train_cmd->add_option("--hidden", train.config.hidden_widths, "Hidden layer widths")
      ->capture_default_str();
  train_cmd->add_flag("--rgb,!--no-rgb", train.mask.use_rgb, "Use color channels")
      ->capture_default_str();
  train_cmd
      ->add_flag("--intensity,!--no-intensity", train.mask.use_intensity,
                 "Use the intensity channel")
      ->capture_default_str();
  train_cmd->add_flag("--sweep", train.sweep, "Train the full (gamma, alpha) grid");
  train_cmd->add_option("--sweep-gammas", train.sweep_gammas, "Gamma grid")
      ->capture_default_str();
  train_cmd->add_option("--sweep-alphas", train.sweep_alphas, "Alpha grid")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Random seed")
      ->capture_default_str();

  // --- detect ----------------------------------------------------------------
  auto* detect_cmd = app.add_subcommand("detect", "Find crack instances in clouds");
  detect_cmd->set_config("--config");
  detect_cmd->add_option("-i,--input", detect.inputs, "Cloud paths or globs")
      ->required();
  detect_cmd->add_option("-m,--model", detect.model_path, "Model file")->required();
  detect_cmd->add_option("-o,--output-dir", detect.output_dir, "Output directory");
  detect_cmd
      ->add_option("-n,--points-per-voxel", detect.points_per_voxel,
                   "Points sampled per voxel")
      ->capture_default_str();
  detect_cmd->add_option("-s,--stride", detect.stride,
                         "Voxel stride (default: the voxel edge)");
  detect_cmd
      ->add_option("--confidence-threshold", detect.clustering.confidence_threshold,
                   "Minimum confidence")
      ->capture_default_str();
  detect_cmd->add_option("--link-distance", detect.clustering.link_distance,
                         "Cluster link distance (m)")
      ->capture_default_str();
  detect_cmd->add_option("--min-cluster-size", detect.clustering.min_cluster_size,
                         "Smallest surviving cluster")
      ->capture_default_str();
  detect_cmd->add_option("--seed", detect.seed, "Random seed")->capture_default_str();
  add_format_option(detect_cmd, detect.format);

  // --- evaluate --------------------------------------------------------------
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Score annotated clouds against ground truth");
  evaluate_cmd->set_config("--config");
  evaluate_cmd->add_option("-i,--input", evaluate.inputs, "Annotated clouds or globs")
      ->required();
  evaluate_cmd->add_option("-o,--output-dir", evaluate.output_dir, "Output directory");
  evaluate_cmd
      ->add_option("--confidence-threshold",
                   evaluate.clustering.confidence_threshold, "Threshold of the run")
      ->capture_default_str();
  evaluate_cmd->add_option("--link-distance", evaluate.clustering.link_distance,
                           "Cluster link distance (m)")
      ->capture_default_str();
  evaluate_cmd
      ->add_option("--min-cluster-size", evaluate.clustering.min_cluster_size,
                   "Smallest surviving cluster")
      ->capture_default_str();
  evaluate_cmd
      ->add_option("--match-fraction", evaluate.match.intersection_fraction,
                   "Fraction of a prediction that must hit a real crack")
      ->capture_default_str();
  evaluate_cmd->add_option("--manifest", evaluate.manifest_path,
                           "Generator manifest for the by-size table");
  evaluate_cmd->add_option("--compare-thresholds", evaluate.compare_thresholds,
                           "Confidence thresholds for the comparison table");
  evaluate_cmd->add_option("--sweep-thresholds", evaluate.sweep_thresholds,
                           "Thresholds for the point-wise curve");

  // --- export-viz ------------------------------------------------------------
  auto* viz_cmd = app.add_subcommand(
      "export-viz", "Recolor annotated clouds by confusion class");
  viz_cmd->set_config("--config");
  viz_cmd->add_option("-i,--input", viz.inputs, "Annotated clouds or globs")
      ->required();
  viz_cmd->add_option("-o,--output-dir", viz.output_dir, "Output directory");
  add_format_option(viz_cmd, viz.format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) {
      if (synth.output_dir.empty()) synth.output_dir = ptcrack::default_output_dir("synth");
      synth.spec.surface.extent_y = synth.spec.surface.extent_x;
      return run_logged(synth.output_dir,
                        [&](std::ostream& log) { return run_synth(synth, log); });
    }
    if (*prepare_cmd) {
      if (prepare.output_dir.empty()) {
        prepare.output_dir = ptcrack::default_output_dir("prepare");
      }
      return run_logged(prepare.output_dir,
                        [&](std::ostream& log) { return run_prepare(prepare, log); });
    }
    if (*train_cmd) {
      if (train.output_dir.empty()) train.output_dir = ptcrack::default_output_dir("train");
      return run_logged(train.output_dir,
                        [&](std::ostream& log) { return run_train(train, log); });
    }
    if (*detect_cmd) {
      if (detect.output_dir.empty()) {
        detect.output_dir = ptcrack::default_output_dir("detect");
      }
      return run_logged(detect.output_dir,
                        [&](std::ostream& log) { return run_detect(detect, log); });
    }
    if (*evaluate_cmd) {
      if (evaluate.output_dir.empty()) {
        evaluate.output_dir = ptcrack::default_output_dir("evaluate");
      }
      return run_logged(evaluate.output_dir,
                        [&](std::ostream& log) { return run_evaluate(evaluate, log); });
    }
    if (*viz_cmd) {
      if (viz.output_dir.empty()) {
        viz.output_dir = ptcrack::default_output_dir("export-viz");
      }
      return run_logged(viz.output_dir,
                        [&](std::ostream& log) { return run_export_viz(viz, log); });
    }
  } catch (const ptcrack::training_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ptcrack::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
