#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptcrack/cloud_io.hpp"
#include "ptcrack/types.hpp"

namespace ptcrack {

struct ScorerModel;

// A connected group of predicted (or ground-truth) crack points.
struct CrackInstance {
  int id = 0;  // dense 1..K within its set
  std::vector<std::uint32_t> member_ids;  // ascending
  Vec3 centroid;

  std::size_t size() const { return member_ids.size(); }
};

// Ids of the points whose confidence reaches the threshold (>=), ascending.
std::vector<std::uint32_t> threshold_points(const AnnotationLayer& annotations,
                                            double confidence_threshold);

// Partitions the candidate points into connected components of the graph
// with an edge between every pair strictly closer than link_distance.
// Grid-accelerated; equals the brute-force transitive closure. Clusters are
// ordered by their smallest member id, members ascending.
std::vector<std::vector<std::uint32_t>> cluster(
    const PointCloud& cloud, const std::vector<std::uint32_t>& candidate_ids,
    double link_distance);

// Drops clusters with fewer than min_cluster_size points and numbers the
// survivors 1..K (ordered by smallest member id).
std::vector<CrackInstance> filter_clusters(
    const std::vector<std::vector<std::uint32_t>>& clusters,
    const PointCloud& cloud, int min_cluster_size);

struct DetectionResult {
  AnnotationLayer annotations;          // confidence, final labels, cluster ids
  std::vector<CrackInstance> instances;
};

// Full inference pipeline on one cloud: voxelize, sample, score, fold back,
// threshold, cluster, reject small clusters.
DetectionResult detect(const PointCloud& cloud, const ScorerModel& model,
                       const VoxelizationConfig& voxel_config,
                       const ClusteringConfig& clustering_config,
                       std::uint64_t seed);

// Ground-truth instances of a labeled cloud: grouped by the stored instance
// ids when present, otherwise by clustering the crack-labeled points at the
// same link distance used for predictions.
std::vector<CrackInstance> ground_truth_instances(const PointCloud& cloud,
                                                  double link_distance);

// Human-readable table: id, point count, centroid, bounding box.
std::string instance_summary(const std::vector<CrackInstance>& instances,
                             const PointCloud& cloud);

}  // namespace ptcrack
