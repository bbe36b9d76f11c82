#include "ptcrack/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ptcrack/downsampler.hpp"
#include "ptcrack/rng.hpp"

namespace ptcrack {

namespace {

struct LatticeKey {
  int x, y, z;
  bool operator<(const LatticeKey& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
};

Vec3 cloud_min(const PointCloud& cloud) {
  Vec3 lo{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  for (const auto& p : cloud.points) {
    lo.x = std::min(lo.x, static_cast<double>(p.x));
    lo.y = std::min(lo.y, static_cast<double>(p.y));
    lo.z = std::min(lo.z, static_cast<double>(p.z));
  }
  return lo;
}

// Candidate lattice steps k with anchor + k*s <= v < anchor + k*s + d.
// Computed by range prediction, then verified with the exact containment
// predicate so float rounding at cell boundaries cannot mis-assign a point.
void axis_candidates(double v, double anchor, double stride, double edge,
                     std::vector<int>& out) {
  out.clear();
  const int hi = static_cast<int>(std::floor((v - anchor) / stride));
  const int lo = static_cast<int>(std::ceil((v - anchor - edge) / stride));
  for (int k = lo - 1; k <= hi + 1; ++k) {
    if (k < 0) continue;
    const double origin = anchor + k * stride;
    if (origin <= v && v < origin + edge) out.push_back(k);
  }
}

}  // namespace

std::vector<Voxel> build_grid(const PointCloud& cloud, const VoxelizationConfig& config) {
  const auto violations = validate_voxel_config(config);
  if (!violations.empty()) {
    throw data_error("invalid voxelization config: " + violations.front());
  }
  if (cloud.empty()) throw data_error("cannot voxelize an empty cloud");

  const Vec3 anchor = cloud_min(cloud);
  const double d = config.edge;
  const double s = config.stride;

  std::map<LatticeKey, std::vector<std::uint32_t>> members;
  std::vector<int> kx, ky, kz;
  for (const auto& p : cloud.points) {
    axis_candidates(p.x, anchor.x, s, d, kx);
    axis_candidates(p.y, anchor.y, s, d, ky);
    axis_candidates(p.z, anchor.z, s, d, kz);
    for (int a : kx) {
      for (int b : ky) {
        for (int c : kz) {
          members[{a, b, c}].push_back(p.id);
        }
      }
    }
  }

  std::vector<Voxel> out;
  out.reserve(members.size());
  for (auto& [key, ids] : members) {
    Voxel v;
    v.index = {key.x, key.y, key.z};
    v.origin = {anchor.x + key.x * s, anchor.y + key.y * s, anchor.z + key.z * s};
    std::sort(ids.begin(), ids.end());
    v.member_ids = std::move(ids);
    v.source_tag = cloud.tag;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Voxel> filter_and_fill(const std::vector<Voxel>& voxels,
                                   const PointCloud& cloud, int n,
                                   std::uint64_t seed) {
  if (n < 8) throw data_error("points per voxel n must be >= 8");
  std::vector<Voxel> out;
  out.reserve(voxels.size());
  for (const Voxel& v : voxels) {
    if (v.member_ids.size() < static_cast<std::size_t>(n)) continue;
    Voxel kept = v;
    if (kept.member_ids.size() > static_cast<std::size_t>(n)) {
      const std::uint64_t salt =
          hash_combine(static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.index[0])),
                       hash_combine(static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.index[1])),
                                    static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.index[2]))));
      kept.member_ids = downsample(cloud, v.member_ids, n, hash_combine(seed, salt));
    }
    out.push_back(std::move(kept));
  }
  return out;
}

AnnotationLayer reconstruct(const PointCloud& cloud,
                            const std::vector<ScoredVoxel>& scored) {
  AnnotationLayer ann;
  ann.resize(cloud.size());
  ann.unclassified.assign(cloud.size(), 1);
  for (const ScoredVoxel& sv : scored) {
    if (sv.confidences.size() != sv.voxel.member_ids.size()) {
      throw data_error("scored voxel has " + std::to_string(sv.confidences.size()) +
                       " confidences for " + std::to_string(sv.voxel.member_ids.size()) +
                       " members");
    }
    for (std::size_t i = 0; i < sv.voxel.member_ids.size(); ++i) {
      const std::uint32_t id = sv.voxel.member_ids[i];
      if (id >= cloud.size()) {
        throw data_error("scored voxel references id " + std::to_string(id) +
                         " outside the cloud");
      }
      const float c = sv.confidences[i];
      if (!(c >= 0.0f && c <= 1.0f)) {
        throw data_error("confidence outside [0,1] for point " + std::to_string(id));
      }
      ann.confidence[id] = std::max(ann.confidence[id], c);
      ann.unclassified[id] = 0;
    }
  }
  return ann;
}

}  // namespace ptcrack
