#include "ptcrack/instancer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_map>

#include "ptcrack/dataset.hpp"
#include "ptcrack/rng.hpp"
#include "ptcrack/scorer.hpp"
#include "ptcrack/voxelizer.hpp"

namespace ptcrack {

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
  }
  std::uint32_t find(std::uint32_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct GridKey {
  long long x, y, z;
  bool operator==(const GridKey& o) const {
    return x == o.x && y == o.y && z == o.z;
  }
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    return static_cast<std::size_t>(hash_combine(
        static_cast<std::uint64_t>(k.x),
        hash_combine(static_cast<std::uint64_t>(k.y), static_cast<std::uint64_t>(k.z))));
  }
};

GridKey grid_key(const Vec3& p, double cell) {
  return {static_cast<long long>(std::floor(p.x / cell)),
          static_cast<long long>(std::floor(p.y / cell)),
          static_cast<long long>(std::floor(p.z / cell))};
}

Vec3 centroid_of(const std::vector<std::uint32_t>& ids, const PointCloud& cloud) {
  Vec3 c{};
  for (std::uint32_t id : ids) c += position(cloud.points[id]);
  return c / static_cast<double>(ids.size());
}

}  // namespace

std::vector<std::uint32_t> threshold_points(const AnnotationLayer& annotations,
                                            double confidence_threshold) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations.confidence[i] >= confidence_threshold) {
      out.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> cluster(
    const PointCloud& cloud, const std::vector<std::uint32_t>& candidate_ids,
    double link_distance) {
  if (!(link_distance > 0.0)) throw data_error("link distance must be > 0");
  for (std::uint32_t id : candidate_ids) {
    if (id >= cloud.size()) {
      throw data_error("candidate id " + std::to_string(id) + " outside cloud");
    }
  }

  // Hash grid with cell size = link distance; all pairs strictly closer than
  // the link distance live in adjacent cells.
  std::vector<std::uint32_t> ids = candidate_ids;
  std::sort(ids.begin(), ids.end());
  std::unordered_map<GridKey, std::vector<std::uint32_t>, GridKeyHash> grid;
  grid.reserve(ids.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) {
    grid[grid_key(position(cloud.points[ids[i]]), link_distance)].push_back(i);
  }

  UnionFind uf(ids.size());
  const double limit2 = link_distance * link_distance;
  for (std::uint32_t i = 0; i < ids.size(); ++i) {
    const Vec3 p = position(cloud.points[ids[i]]);
    const GridKey base = grid_key(p, link_distance);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({base.x + dx, base.y + dy, base.z + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t j : it->second) {
            if (j <= i) continue;
            if (distance2(p, position(cloud.points[ids[j]])) < limit2) {
              uf.unite(i, j);
            }
          }
        }
      }
    }
  }

  std::map<std::uint32_t, std::vector<std::uint32_t>> by_root;
  for (std::uint32_t i = 0; i < ids.size(); ++i) {
    by_root[uf.find(i)].push_back(ids[i]);
  }
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(by_root.size());
  for (auto& [root, members] : by_root) out.push_back(std::move(members));
  // roots are minimal member indices over sorted ids, so clusters already
  // come out ordered by smallest member id
  return out;
}

std::vector<CrackInstance> filter_clusters(
    const std::vector<std::vector<std::uint32_t>>& clusters,
    const PointCloud& cloud, int min_cluster_size) {
  if (min_cluster_size < 1) throw data_error("minimum cluster size must be >= 1");
  std::vector<const std::vector<std::uint32_t>*> kept;
  for (const auto& c : clusters) {
    if (c.size() >= static_cast<std::size_t>(min_cluster_size)) kept.push_back(&c);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto* a, const auto* b) { return a->front() < b->front(); });

  std::vector<CrackInstance> out;
  out.reserve(kept.size());
  int next_id = 1;
  for (const auto* c : kept) {
    CrackInstance inst;
    inst.id = next_id++;
    inst.member_ids = *c;
    std::sort(inst.member_ids.begin(), inst.member_ids.end());
    inst.centroid = centroid_of(inst.member_ids, cloud);
    out.push_back(std::move(inst));
  }
  return out;
}

DetectionResult detect(const PointCloud& cloud, const ScorerModel& model,
                       const VoxelizationConfig& voxel_config,
                       const ClusteringConfig& clustering_config,
                       std::uint64_t seed) {
  {
    auto violations = validate_voxel_config(voxel_config);
    for (auto& v : validate_clustering_config(clustering_config)) violations.push_back(v);
    if (!violations.empty()) {
      throw data_error("invalid detect configuration: " + violations.front());
    }
  }
  if (std::abs(model.stats.voxel_edge - voxel_config.edge) > 1e-12) {
    throw data_error("model expects voxel edge " + std::to_string(model.stats.voxel_edge) +
                     " but config has " + std::to_string(voxel_config.edge));
  }

  const auto grid = build_grid(cloud, voxel_config);
  const auto filled = filter_and_fill(grid, cloud, voxel_config.points_per_voxel,
                                      hash_combine(seed, 0x66696c6cULL));

  std::vector<ScoredVoxel> scored;
  scored.reserve(filled.size());
  for (const Voxel& v : filled) {
    const NormalizedVoxel nv = normalize_voxel(cloud, v, model.stats, model.mask);
    const std::vector<double> conf = predict(model, nv);
    ScoredVoxel sv;
    sv.voxel = v;
    sv.confidences.reserve(conf.size());
    for (double c : conf) sv.confidences.push_back(static_cast<float>(c));
    scored.push_back(std::move(sv));
  }

  DetectionResult result;
  result.annotations = reconstruct(cloud, scored);
  const auto candidates =
      threshold_points(result.annotations, clustering_config.confidence_threshold);
  const auto clusters = cluster(cloud, candidates, clustering_config.link_distance);
  result.instances =
      filter_clusters(clusters, cloud, clustering_config.min_cluster_size);

  for (const CrackInstance& inst : result.instances) {
    for (std::uint32_t id : inst.member_ids) {
      result.annotations.predicted_label[id] = 1;
      result.annotations.cluster_id[id] = inst.id;
    }
  }
  return result;
}

std::vector<CrackInstance> ground_truth_instances(const PointCloud& cloud,
                                                  double link_distance) {
  std::map<std::int32_t, std::vector<std::uint32_t>> by_gt;
  for (const auto& p : cloud.points) {
    if (p.gt_instance > 0) by_gt[p.gt_instance].push_back(p.id);
  }
  std::vector<CrackInstance> out;
  if (!by_gt.empty()) {
    int next_id = 1;
    for (auto& [gt, members] : by_gt) {
      CrackInstance inst;
      inst.id = next_id++;
      std::sort(members.begin(), members.end());
      inst.member_ids = std::move(members);
      inst.centroid = centroid_of(inst.member_ids, cloud);
      out.push_back(std::move(inst));
    }
    return out;
  }

  std::vector<std::uint32_t> crack_ids;
  for (const auto& p : cloud.points) {
    if (p.label != 0) crack_ids.push_back(p.id);
  }
  if (crack_ids.empty()) return out;
  const auto clusters = cluster(cloud, crack_ids, link_distance);
  return filter_clusters(clusters, cloud, 1);
}

std::string instance_summary(const std::vector<CrackInstance>& instances,
                             const PointCloud& cloud) {
  std::string out =
      "id\tpoints\tcentroid_x\tcentroid_y\tcentroid_z\tbbox_min\tbbox_max\n";
  char buf[256];
  for (const CrackInstance& inst : instances) {
    Vec3 lo{std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi = lo * -1.0;
    for (std::uint32_t id : inst.member_ids) {
      const Vec3 p = position(cloud.points[id]);
      lo.x = std::min(lo.x, p.x);
      lo.y = std::min(lo.y, p.y);
      lo.z = std::min(lo.z, p.z);
      hi.x = std::max(hi.x, p.x);
      hi.y = std::max(hi.y, p.y);
      hi.z = std::max(hi.z, p.z);
    }
    std::snprintf(buf, sizeof buf,
                  "%d\t%zu\t%.6g\t%.6g\t%.6g\t(%.6g %.6g %.6g)\t(%.6g %.6g %.6g)\n",
                  inst.id, inst.member_ids.size(), inst.centroid.x, inst.centroid.y,
                  inst.centroid.z, lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
    out += buf;
  }
  return out;
}

}  // namespace ptcrack
