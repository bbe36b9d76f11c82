#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ptcrack/cloud_io.hpp"
#include "ptcrack/types.hpp"

namespace ptcrack {

// A cubic window over the cloud. Members are the ids of the points inside
// [origin, origin + edge)^3, ascending.
struct Voxel {
  Vec3 origin;
  std::array<int, 3> index{};  // lattice steps from the bounding-box corner
  std::vector<std::uint32_t> member_ids;
  std::string source_tag;
};

// Slides a cube of the configured edge at the configured stride over the
// cloud's bounding box (anchored at its minimum corner) and returns every
// non-empty voxel, ordered by lattice index. With stride == edge the voxels
// partition the cloud; smaller strides produce overlapping voxels.
std::vector<Voxel> build_grid(const PointCloud& cloud, const VoxelizationConfig& config);

// Drops voxels holding fewer than n points and reduces voxels holding more
// to exactly n members via downsample(). Each voxel draws its own random
// stream from (seed, lattice index), so results do not depend on voxel order.
std::vector<Voxel> filter_and_fill(const std::vector<Voxel>& voxels,
                                   const PointCloud& cloud, int n,
                                   std::uint64_t seed);

struct ScoredVoxel {
  Voxel voxel;
  std::vector<float> confidences;  // aligned with voxel.member_ids
};

// Folds per-voxel confidences back onto the cloud. A point covered by
// several voxels keeps its maximum confidence; a point covered by none gets
// confidence 0 and its unclassified flag set.
AnnotationLayer reconstruct(const PointCloud& cloud,
                            const std::vector<ScoredVoxel>& scored);

}  // namespace ptcrack
