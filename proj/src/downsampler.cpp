#include "ptcrack/downsampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "ptcrack/rng.hpp"

namespace ptcrack {

namespace {

struct CellKey {
  int x, y, z;
  bool operator<(const CellKey& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
  bool operator==(const CellKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(
        splitmix64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) |
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) << 21 |
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z)) << 42));
  }
};

struct Bounds {
  Vec3 lo, hi;
};

Bounds bounding_box(const PointCloud& cloud, const std::vector<std::uint32_t>& ids) {
  Bounds b;
  b.lo = {std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  b.hi = {-std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (std::uint32_t id : ids) {
    const Vec3 p = position(cloud.points[id]);
    b.lo.x = std::min(b.lo.x, p.x);
    b.lo.y = std::min(b.lo.y, p.y);
    b.lo.z = std::min(b.lo.z, p.z);
    b.hi.x = std::max(b.hi.x, p.x);
    b.hi.y = std::max(b.hi.y, p.y);
    b.hi.z = std::max(b.hi.z, p.z);
  }
  return b;
}

int axis_cell(double v, double lo, double extent, int grid) {
  if (extent <= 0.0) return 0;
  int c = static_cast<int>((v - lo) / extent * grid);
  return std::clamp(c, 0, grid - 1);
}

CellKey cell_of(const Vec3& p, const Bounds& b, int grid) {
  return {axis_cell(p.x, b.lo.x, b.hi.x - b.lo.x, grid),
          axis_cell(p.y, b.lo.y, b.hi.y - b.lo.y, grid),
          axis_cell(p.z, b.lo.z, b.hi.z - b.lo.z, grid)};
}

std::size_t count_distinct_positions(const PointCloud& cloud,
                                     const std::vector<std::uint32_t>& ids) {
  std::set<std::array<float, 3>> positions;
  for (std::uint32_t id : ids) {
    const LabeledPoint& p = cloud.points[id];
    positions.insert({p.x, p.y, p.z});
  }
  return positions.size();
}

}  // namespace

std::vector<CellGroup> cell_partition(const PointCloud& cloud,
                                      const std::vector<std::uint32_t>& ids,
                                      int grid) {
  if (grid < 1) throw data_error("cell partition grid must be >= 1");
  if (ids.empty()) throw data_error("cell partition needs at least one point");
  const Bounds b = bounding_box(cloud, ids);

  std::map<CellKey, std::vector<std::uint32_t>> cells;
  for (std::uint32_t id : ids) {
    cells[cell_of(position(cloud.points[id]), b, grid)].push_back(id);
  }
  std::vector<CellGroup> out;
  out.reserve(cells.size());
  for (auto& [key, members] : cells) {
    std::sort(members.begin(), members.end());
    out.push_back({{key.x, key.y, key.z}, std::move(members), {}});
  }
  return out;
}

DownsampleDetail downsample_detailed(const PointCloud& cloud,
                                     const std::vector<std::uint32_t>& ids,
                                     int n, std::uint64_t seed) {
  if (n < 8) throw data_error("downsample target n must be >= 8");
  if (ids.size() < static_cast<std::size_t>(n)) {
    throw data_error("insufficient points: have " + std::to_string(ids.size()) +
                     ", need " + std::to_string(n));
  }
  for (std::uint32_t id : ids) {
    if (id >= cloud.size()) {
      throw data_error("point id " + std::to_string(id) + " outside cloud");
    }
  }
  if (count_distinct_positions(cloud, ids) < static_cast<std::size_t>(n)) {
    throw data_error("insufficient distinct positions to reach " + std::to_string(n));
  }

  // Refine until at least n cells are occupied. Terminates because distinct
  // positions eventually separate into their own cells.
  int grid = std::max(1, static_cast<int>(std::floor(std::cbrt(static_cast<double>(n)))));
  std::vector<CellGroup> groups = cell_partition(cloud, ids, grid);
  while (groups.size() < static_cast<std::size_t>(n)) {
    ++grid;
    groups = cell_partition(cloud, ids, grid);
  }

  std::vector<char> merged_away(groups.size(), 0);
  if (groups.size() > static_cast<std::size_t>(n)) {
    Rng rng(seed);
    const std::size_t surplus = groups.size() - static_cast<std::size_t>(n);
    const std::vector<std::size_t> chosen = rng.sample_indices(groups.size(), surplus);
    std::vector<char> is_chosen(groups.size(), 0);
    for (std::size_t idx : chosen) is_chosen[idx] = 1;

    std::unordered_map<CellKey, std::size_t, CellKeyHash> cell_index;
    cell_index.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      cell_index[{groups[i].cell[0], groups[i].cell[1], groups[i].cell[2]}] = i;
    }
    // Follows merge redirections so absorbed cells keep counting as occupied.
    std::vector<std::size_t> parent(groups.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto root = [&](std::size_t i) {
      while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
      }
      return i;
    };

    for (std::size_t sel : chosen) {
      // Widen the Chebyshev ring until an occupied, unselected neighbor group
      // exists; with n unselected groups present one always does.
      std::vector<std::size_t> candidates;
      const auto& c = groups[sel].cell;
      for (int radius = 1; candidates.empty() && radius <= 2 * grid; ++radius) {
        std::vector<char> seen(groups.size(), 0);
        for (int dx = -radius; dx <= radius; ++dx) {
          for (int dy = -radius; dy <= radius; ++dy) {
            for (int dz = -radius; dz <= radius; ++dz) {
              if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != radius) continue;
              const auto it = cell_index.find({c[0] + dx, c[1] + dy, c[2] + dz});
              if (it == cell_index.end()) continue;
              const std::size_t g = root(it->second);
              if (is_chosen[g] || seen[g]) continue;
              seen[g] = 1;
              candidates.push_back(g);
            }
          }
        }
      }
      if (candidates.empty()) {
        throw data_error("no eligible neighbor group for merge");
      }
      const std::size_t target = candidates[rng.below(candidates.size())];

      CellGroup& dst = groups[target];
      CellGroup& src = groups[sel];
      std::vector<std::uint32_t> merged;
      merged.reserve(dst.member_ids.size() + src.member_ids.size());
      std::merge(dst.member_ids.begin(), dst.member_ids.end(),
                 src.member_ids.begin(), src.member_ids.end(),
                 std::back_inserter(merged));
      dst.member_ids = std::move(merged);
      dst.merged_from.push_back(src.cell);
      for (const auto& cell : src.merged_from) dst.merged_from.push_back(cell);
      src.member_ids.clear();
      src.merged_from.clear();
      merged_away[sel] = 1;
      parent[sel] = target;
    }
  }

  DownsampleDetail detail;
  detail.grid = grid;
  detail.groups.reserve(n);
  detail.emitted.reserve(n);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (merged_away[i]) continue;
    CellGroup& g = groups[i];
    Vec3 centroid{};
    for (std::uint32_t id : g.member_ids) centroid += position(cloud.points[id]);
    centroid = centroid / static_cast<double>(g.member_ids.size());

    std::uint32_t best = g.member_ids.front();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t id : g.member_ids) {
      const double d2 = distance2(position(cloud.points[id]), centroid);
      if (d2 < best_d2) {  // ids ascend, so first minimum wins ties
        best_d2 = d2;
        best = id;
      }
    }
    detail.emitted.push_back(best);
    detail.groups.push_back(std::move(g));
  }
  detail.selected = detail.emitted;
  std::sort(detail.selected.begin(), detail.selected.end());
  return detail;
}

std::vector<std::uint32_t> downsample(const PointCloud& cloud,
                                      const std::vector<std::uint32_t>& ids,
                                      int n, std::uint64_t seed) {
  return downsample_detailed(cloud, ids, n, seed).selected;
}

}  // namespace ptcrack
