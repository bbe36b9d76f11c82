#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ptcrack/types.hpp"

namespace ptcrack {

// One occupied cell of the sampling lattice, possibly holding cells merged
// into it. Each surviving group contributes exactly one output point.
struct CellGroup {
  std::array<int, 3> cell{};                    // lattice index
  std::vector<std::uint32_t> member_ids;        // ascending
  std::vector<std::array<int, 3>> merged_from;  // cells absorbed into this group
};

// Splits the bounding box of the referenced points into grid^3 half-open
// cells (grid intervals per axis, cells may be anisotropic) and returns one
// group per occupied cell, ordered by cell index. Points on the upper
// boundary of an axis land in its last cell.
std::vector<CellGroup> cell_partition(const PointCloud& cloud,
                                      const std::vector<std::uint32_t>& ids,
                                      int grid);

struct DownsampleDetail {
  int grid = 0;                          // final per-axis subdivision
  std::vector<CellGroup> groups;         // exactly n groups after merging
  std::vector<std::uint32_t> emitted;    // chosen point per group, same order
  std::vector<std::uint32_t> selected;   // union of emitted, ascending
};

// Density-preserving reduction to exactly n points:
// refine the lattice until at least n cells are occupied, merge randomly
// chosen surplus groups into random eligible neighbors, then keep the member
// nearest each group centroid (ties broken by lowest id). Sparse, isolated
// points occupy their own cells and survive, unlike under uniform sampling.
// Throws data_error when fewer than n points (or n distinct positions) exist.
DownsampleDetail downsample_detailed(const PointCloud& cloud,
                                     const std::vector<std::uint32_t>& ids,
                                     int n, std::uint64_t seed);

std::vector<std::uint32_t> downsample(const PointCloud& cloud,
                                      const std::vector<std::uint32_t>& ids,
                                      int n, std::uint64_t seed);

}  // namespace ptcrack
