#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ptcrack/cloud_io.hpp"
#include "ptcrack/dataset.hpp"
#include "ptcrack/scorer.hpp"
#include "ptcrack/synthgen.hpp"
#include "ptcrack/types.hpp"

namespace ptcrack {

// Commands are deterministic for a fixed seed: rerunning one into a fresh
// directory produces byte-identical outputs. Logs carry the resolved
// configuration but no timestamps.

struct SynthOptions {
  std::string output_dir;
  DatasetSpec spec;
  PlyFormat format = PlyFormat::binary_little_endian;
};

struct PrepareOptions {
  std::vector<std::string> inputs;  // cloud paths or glob patterns
  std::string output_dir;
  VoxelizationConfig voxel;   // stride applies to train/val; test runs at stride = edge
  double band_width = 0.15;
  double gt_link_distance = 0.04;
  int augment_copies = 0;
  double augment_max_offset = 0.5;
  std::uint64_t seed = 1;
};

struct TrainOptions {
  std::string prepare_dir;  // directory written by prepare
  std::string output_dir;
  TrainingConfig config;
  FeatureMask mask;
  bool sweep = false;  // train every (gamma, alpha) grid cell
  std::vector<double> sweep_gammas = {2, 3, 4, 5};
  std::vector<double> sweep_alphas = {0.10, 0.25, 0.50, 0.75, 0.90};
};

struct DetectOptions {
  std::vector<std::string> inputs;
  std::string model_path;
  std::string output_dir;
  int points_per_voxel = 2048;
  double stride = 0.0;  // 0 = voxel edge (no overlap)
  ClusteringConfig clustering;
  MatchConfig match;
  std::uint64_t seed = 1;
  PlyFormat format = PlyFormat::binary_little_endian;
};

struct EvaluateOptions {
  std::vector<std::string> inputs;  // annotated clouds written by detect
  std::string output_dir;
  ClusteringConfig clustering;      // for re-thresholding and ground truth
  MatchConfig match;
  std::string manifest_path;        // optional: widths for the by-size table
  std::vector<double> compare_thresholds;  // extra confidence thresholds
  std::vector<double> sweep_thresholds;    // point-wise curve
};

struct ExportVizOptions {
  std::vector<std::string> inputs;
  std::string output_dir;
  PlyFormat format = PlyFormat::binary_little_endian;
};

// Persisted voxel sets: which clouds, and per voxel the member ids chosen at
// preparation time.
struct VoxelSetEntry {
  std::uint32_t cloud_index = 0;
  std::array<int, 3> index{};
  Vec3 origin;
  std::vector<std::uint32_t> member_ids;
};

struct VoxelSetFile {
  std::vector<std::string> cloud_files;  // relative to the set file
  std::vector<VoxelSetEntry> entries;
};

void write_voxel_set(const VoxelSetFile& set, const std::string& path);
VoxelSetFile read_voxel_set(const std::string& path);

void write_stats(const NormalizationStats& stats, const std::string& path);
NormalizationStats read_stats(const std::string& path);

int run_synth(const SynthOptions& options, std::ostream& log);
int run_prepare(const PrepareOptions& options, std::ostream& log);
int run_train(const TrainOptions& options, std::ostream& log);
int run_detect(const DetectOptions& options, std::ostream& log);
int run_evaluate(const EvaluateOptions& options, std::ostream& log);
int run_export_viz(const ExportVizOptions& options, std::ostream& log);

// Default run directory: $PTCRACK_RUN_DIR or ./runs, plus the command name.
std::string default_output_dir(const std::string& command);

}  // namespace ptcrack
