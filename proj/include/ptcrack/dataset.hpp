#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ptcrack/mat.hpp"
#include "ptcrack/types.hpp"
#include "ptcrack/voxelizer.hpp"

namespace ptcrack {

// Which per-point channels feed the scorer on top of the coordinates.
struct FeatureMask {
  bool use_rgb = true;
  bool use_intensity = false;

  int dim() const { return (use_rgb ? 3 : 0) + (use_intensity ? 1 : 0); }
};

// Channel ranges observed on the training set, plus the coordinate scale.
// Feature order: r, g, b, intensity.
struct NormalizationStats {
  std::array<double, 4> feature_min{{0, 0, 0, 0}};
  std::array<double, 4> feature_max{{255, 255, 255, 1}};
  double voxel_edge = 0.5;
};

struct DatasetStats {
  long long n_pos = 0;  // crack points
  long long n_neg = 0;  // non-crack points
};

// A voxel ready for scoring: coordinates rescaled to the unit cube,
// selected channels min-max normalized, labels carried along.
struct NormalizedVoxel {
  std::array<int, 3> index{};
  Vec3 origin;
  double edge = 0.0;
  std::string tag;
  FeatureMask mask;
  std::vector<std::uint32_t> ids;      // source point ids, row order
  Mat coords;                          // n x 3, in [0,1]
  Mat features;                        // n x mask.dim(), in [0,1]
  std::vector<std::uint8_t> labels;    // n

  int point_count() const { return coords.rows; }
};

// Crack points plus the non-crack points within band_width of the nearest
// crack point. Restricting negatives to this band is how the training set
// rebalances the classes. Output ids are reassigned contiguously.
// Throws data_error when the cloud has no crack points.
PointCloud negative_band(const PointCloud& cloud, double band_width = 0.15);

struct SplitRecord {
  std::string cloud_tag;
  int instance_id;
  std::string partition;  // train | val | test
};

struct SplitResult {
  std::vector<PointCloud> train;  // crack points + negative bands
  std::vector<PointCloud> val;
  std::vector<PointCloud> test;   // remaining surface travels here
  std::vector<SplitRecord> manifest;
};

// Partitions ground-truth crack instances 2/3 : 1/3 into a training pool and
// test, then the pool 2 : 1 into train and val. A crack's points and its
// negative band travel together; non-crack points outside every band go to
// test. Fewer than 3 instances is an error.
SplitResult split_by_crack(const std::vector<PointCloud>& clouds,
                           std::uint64_t seed, double band_width = 0.15,
                           double gt_link_distance = 0.04);

void write_split_manifest(const std::vector<SplitRecord>& manifest,
                          const std::string& path);
std::vector<SplitRecord> read_split_manifest(const std::string& path);

// Channel min/max over the given clouds; coordinate scale from voxel_edge.
NormalizationStats compute_stats(const std::vector<PointCloud>& train_clouds,
                                 double voxel_edge);

// Label counts over voxel members (what the scorer actually trains on).
DatasetStats count_voxel_labels(const std::vector<NormalizedVoxel>& voxels);

// Maps members into the unit cube ((p - origin) / edge) and min-max
// normalizes the selected channels, clamping to [0,1]. A channel with
// max == min is emitted as 0.5 with a warning.
NormalizedVoxel normalize_voxel(const PointCloud& cloud, const Voxel& voxel,
                                const NormalizationStats& stats,
                                const FeatureMask& mask,
                                std::vector<std::string>* warnings = nullptr);

// Training-time jitter: every coordinate moves by 0.001*r meters
// (r standard normal), clamped to +/-0.005 m, expressed in normalized units.
NormalizedVoxel perturb(const NormalizedVoxel& voxel, std::uint64_t seed);

PointCloud translate_cloud(const PointCloud& cloud, int axis, double offset);

// Augmentation copies, each shifted along one random axis by a uniform
// offset in [0, max_offset]. Labels and instance ids are preserved.
std::vector<PointCloud> translate_augment(const PointCloud& cloud, int copies,
                                          double max_offset, std::uint64_t seed);

}  // namespace ptcrack
