#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptcrack {

// Malformed or inconsistent input data/files. The CLI maps it to exit code 2.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimization diverged. The CLI maps it to exit code 3.
struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
};

inline double distance2(const Vec3& a, const Vec3& b) { return (a - b).norm2(); }
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

struct LabeledPoint {
  float x = 0.0f, y = 0.0f, z = 0.0f;  // meters, sensor frame
  std::uint8_t r = 0, g = 0, b = 0;    // color channels, [0,255]
  float intensity = 0.0f;              // raw reflectance
  std::uint8_t label = 0;              // 0 = non-crack, 1 = crack
  std::int32_t gt_instance = 0;        // ground-truth crack instance id, 0 = none
  std::uint32_t id = 0;                // ordinal within the owning cloud
};

inline Vec3 position(const LabeledPoint& p) { return {p.x, p.y, p.z}; }

// Points are stored in id order; id i lives at points[i]. Every operation
// that builds a new cloud reassigns contiguous ids in iteration order.
struct PointCloud {
  std::string tag;
  std::vector<LabeledPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Sliding-window voxelization parameters [d, n, s].
struct VoxelizationConfig {
  double edge = 0.5;           // d: cube edge length, meters
  int points_per_voxel = 2048; // n: fixed sample count per voxel
  double stride = 0.5;         // s: window step, meters, 0 < s <= d
};

// Post-processing thresholds.
struct ClusteringConfig {
  double confidence_threshold = 0.59; // minimum per-point confidence to keep
  double link_distance = 0.04;        // meters; points closer than this join a cluster
  int min_cluster_size = 20;          // clusters with fewer points are rejected
};

// Instance matching: a predicted instance counts as a hit when at least this
// fraction of its points lies on a real crack.
struct MatchConfig {
  double intersection_fraction = 0.5;
};

// Returns the list of violated invariants; empty means all three configs are
// valid and accepted by every downstream operation.
std::vector<std::string> validate_config(const VoxelizationConfig& voxel,
                                         const ClusteringConfig& clustering,
                                         const MatchConfig& match);

// Throws data_error listing the violations when the configs are invalid.
void require_valid(const VoxelizationConfig& voxel,
                   const ClusteringConfig& clustering, const MatchConfig& match);

std::vector<std::string> validate_voxel_config(const VoxelizationConfig& voxel);
std::vector<std::string> validate_clustering_config(const ClusteringConfig& c);
std::vector<std::string> validate_match_config(const MatchConfig& m);

}  // namespace ptcrack
