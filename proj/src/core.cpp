#include "ptcrack/types.hpp"

#include <sstream>

namespace ptcrack {

std::vector<std::string> validate_voxel_config(const VoxelizationConfig& v) {
  std::vector<std::string> out;
  if (!(v.edge > 0.0) || !std::isfinite(v.edge)) {
    out.push_back("voxel edge d must be finite and > 0");
  }
  if (v.points_per_voxel < 8) {
    out.push_back("points per voxel n must be >= 8");
  }
  if (!(v.stride > 0.0) || !std::isfinite(v.stride)) {
    out.push_back("stride s must be finite and > 0");
  } else if (v.stride > v.edge) {
    out.push_back("s > d");
  }
  return out;
}

std::vector<std::string> validate_clustering_config(const ClusteringConfig& c) {
  std::vector<std::string> out;
  if (!(c.confidence_threshold > 0.0) || c.confidence_threshold > 1.0 ||
      !std::isfinite(c.confidence_threshold)) {
    out.push_back("confidence threshold must be in (0,1]");
  }
  if (!(c.link_distance > 0.0) || !std::isfinite(c.link_distance)) {
    out.push_back("link distance must be > 0");
  }
  if (c.min_cluster_size < 1) {
    out.push_back("minimum cluster size must be >= 1");
  }
  return out;
}

std::vector<std::string> validate_match_config(const MatchConfig& m) {
  std::vector<std::string> out;
  if (!(m.intersection_fraction > 0.0) || m.intersection_fraction > 1.0 ||
      !std::isfinite(m.intersection_fraction)) {
    out.push_back("intersection fraction must be in (0,1]");
  }
  return out;
}

std::vector<std::string> validate_config(const VoxelizationConfig& voxel,
                                         const ClusteringConfig& clustering,
                                         const MatchConfig& match) {
  std::vector<std::string> out = validate_voxel_config(voxel);
  for (auto& v : validate_clustering_config(clustering)) out.push_back(v);
  for (auto& v : validate_match_config(match)) out.push_back(v);
  return out;
}

void require_valid(const VoxelizationConfig& voxel,
                   const ClusteringConfig& clustering, const MatchConfig& match) {
  const auto violations = validate_config(voxel, clustering, match);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid configuration:";
  for (const auto& v : violations) msg << " [" << v << "]";
  throw data_error(msg.str());
}

}  // namespace ptcrack
