#include "ptcrack/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ptcrack/instancer.hpp"
#include "ptcrack/rng.hpp"

namespace ptcrack {

namespace {

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

// Uniform grid over the crack points, cell size = search radius, so a
// nearest-crack query only has to visit the 27 surrounding cells.
class CrackProximity {
 public:
  CrackProximity(const PointCloud& cloud, const std::vector<std::uint32_t>& crack_ids,
                 double radius)
      : cloud_(cloud), radius_(radius) {
    for (std::uint32_t id : crack_ids) {
      cells_[key_of(position(cloud.points[id]))].push_back(id);
    }
  }

  // id of the nearest crack point within the radius, or -1
  std::int64_t nearest_within(const Vec3& p) const {
    const GridKey base = key_of(p);
    const double limit2 = radius_ * radius_;
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_id = -1;
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({base.x + dx, base.y + dy, base.z + dz});
          if (it == cells_.end()) continue;
          for (std::uint32_t id : it->second) {
            const double d2 = distance2(p, position(cloud_.points[id]));
            if (d2 <= limit2 && (d2 < best || (d2 == best && id < best_id))) {
              best = d2;
              best_id = id;
            }
          }
        }
      }
    }
    return best_id;
  }

 private:
  GridKey key_of(const Vec3& p) const {
    return {static_cast<long long>(std::floor(p.x / radius_)),
            static_cast<long long>(std::floor(p.y / radius_)),
            static_cast<long long>(std::floor(p.z / radius_))};
  }

  const PointCloud& cloud_;
  double radius_;
  std::unordered_map<GridKey, std::vector<std::uint32_t>, GridKeyHash> cells_;
};

PointCloud subset_cloud(const PointCloud& cloud, const std::vector<std::uint32_t>& ids,
                        const std::string& tag_suffix) {
  PointCloud out;
  out.tag = cloud.tag + tag_suffix;
  out.points.reserve(ids.size());
  for (std::uint32_t id : ids) {
    LabeledPoint p = cloud.points[id];
    p.id = static_cast<std::uint32_t>(out.points.size());
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

PointCloud negative_band(const PointCloud& cloud, double band_width) {
  if (!(band_width > 0.0)) throw data_error("band width must be > 0");
  std::vector<std::uint32_t> crack_ids;
  for (const auto& p : cloud.points) {
    if (p.label != 0) crack_ids.push_back(p.id);
  }
  if (crack_ids.empty()) {
    throw data_error("cloud '" + cloud.tag + "' has no crack points");
  }
  const CrackProximity prox(cloud, crack_ids, band_width);

  std::vector<std::uint32_t> selected;
  for (const auto& p : cloud.points) {
    if (p.label != 0 || prox.nearest_within(position(p)) >= 0) {
      selected.push_back(p.id);
    }
  }
  return subset_cloud(cloud, selected, ":band");
}

SplitResult split_by_crack(const std::vector<PointCloud>& clouds,
                           std::uint64_t seed, double band_width,
                           double gt_link_distance) {
  struct InstanceRef {
    std::size_t cloud_index;
    int instance_id;
    std::vector<std::uint32_t> member_ids;
  };

  std::vector<InstanceRef> instances;
  std::vector<std::vector<CrackInstance>> per_cloud(clouds.size());
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    per_cloud[c] = ground_truth_instances(clouds[c], gt_link_distance);
    for (const auto& inst : per_cloud[c]) {
      instances.push_back({c, inst.id, inst.member_ids});
    }
  }
  if (instances.size() < 3) {
    throw data_error("crack-wise split needs at least 3 instances, found " +
                     std::to_string(instances.size()));
  }

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t pool_count = instances.size() * 2 / 3;
  const std::size_t train_count = pool_count * 2 / 3;
  // partition per instance: 0 train, 1 val, 2 test
  std::vector<int> partition(instances.size(), 2);
  for (std::size_t i = 0; i < pool_count; ++i) {
    partition[order[i]] = i < train_count ? 0 : 1;
  }

  SplitResult result;
  static const char* kNames[3] = {"train", "val", "test"};
  for (std::size_t i = 0; i < instances.size(); ++i) {
    result.manifest.push_back({clouds[instances[i].cloud_index].tag,
                               instances[i].instance_id, kNames[partition[i]]});
  }

  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const PointCloud& cloud = clouds[c];

    // crack point -> its instance's partition
    std::unordered_map<std::uint32_t, int> crack_partition;
    std::vector<std::uint32_t> crack_ids;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances[i].cloud_index != c) continue;
      for (std::uint32_t id : instances[i].member_ids) {
        crack_partition[id] = partition[i];
        crack_ids.push_back(id);
      }
    }

    std::vector<std::uint32_t> split_ids[3];
    if (crack_ids.empty()) {
      for (const auto& p : cloud.points) split_ids[2].push_back(p.id);
    } else {
      const CrackProximity prox(cloud, crack_ids, band_width);
      for (const auto& p : cloud.points) {
        const auto it = crack_partition.find(p.id);
        if (it != crack_partition.end()) {
          split_ids[it->second].push_back(p.id);
          continue;
        }
        // Band points follow the nearest crack's partition; everything
        // farther than the band is test surface.
        const std::int64_t nearest = prox.nearest_within(position(p));
        if (nearest >= 0) {
          split_ids[crack_partition.at(static_cast<std::uint32_t>(nearest))]
              .push_back(p.id);
        } else {
          split_ids[2].push_back(p.id);
        }
      }
    }

    std::vector<PointCloud>* sinks[3] = {&result.train, &result.val, &result.test};
    for (int s = 0; s < 3; ++s) {
      if (split_ids[s].empty()) continue;
      sinks[s]->push_back(
          subset_cloud(cloud, split_ids[s], std::string(":") + kNames[s]));
    }
  }
  return result;
}

void write_split_manifest(const std::vector<SplitRecord>& manifest,
                          const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  for (const auto& rec : manifest) {
    out << rec.cloud_tag << '\t' << rec.instance_id << '\t' << rec.partition << '\n';
  }
}

std::vector<SplitRecord> read_split_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  std::vector<SplitRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SplitRecord rec;
    if (!(ls >> rec.cloud_tag >> rec.instance_id >> rec.partition)) {
      throw data_error("malformed split manifest line: " + line);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

NormalizationStats compute_stats(const std::vector<PointCloud>& train_clouds,
                                 double voxel_edge) {
  NormalizationStats stats;
  stats.voxel_edge = voxel_edge;
  stats.feature_min.fill(std::numeric_limits<double>::infinity());
  stats.feature_max.fill(-std::numeric_limits<double>::infinity());
  bool any = false;
  for (const auto& cloud : train_clouds) {
    for (const auto& p : cloud.points) {
      any = true;
      const double values[4] = {static_cast<double>(p.r), static_cast<double>(p.g),
                                static_cast<double>(p.b),
                                static_cast<double>(p.intensity)};
      for (int f = 0; f < 4; ++f) {
        stats.feature_min[f] = std::min(stats.feature_min[f], values[f]);
        stats.feature_max[f] = std::max(stats.feature_max[f], values[f]);
      }
    }
  }
  if (!any) throw data_error("cannot compute normalization stats of an empty set");
  return stats;
}

DatasetStats count_voxel_labels(const std::vector<NormalizedVoxel>& voxels) {
  DatasetStats stats;
  for (const auto& v : voxels) {
    for (std::uint8_t label : v.labels) {
      if (label != 0) {
        ++stats.n_pos;
      } else {
        ++stats.n_neg;
      }
    }
  }
  return stats;
}

NormalizedVoxel normalize_voxel(const PointCloud& cloud, const Voxel& voxel,
                                const NormalizationStats& stats,
                                const FeatureMask& mask,
                                std::vector<std::string>* warnings) {
  const int n = static_cast<int>(voxel.member_ids.size());
  if (n == 0) throw data_error("cannot normalize an empty voxel");
  const double d = stats.voxel_edge;
  if (!(d > 0.0)) throw data_error("normalization stats have no voxel edge");

  NormalizedVoxel nv;
  nv.index = voxel.index;
  nv.origin = voxel.origin;
  nv.edge = d;
  nv.tag = voxel.source_tag;
  nv.mask = mask;
  nv.ids = voxel.member_ids;
  nv.coords = Mat(n, 3);
  nv.features = Mat(n, mask.dim());
  nv.labels.resize(n);

  // channel indices into the stats arrays, in emission order
  std::vector<int> channels;
  if (mask.use_rgb) channels.insert(channels.end(), {0, 1, 2});
  if (mask.use_intensity) channels.push_back(3);

  std::vector<char> warned(4, 0);
  for (int i = 0; i < n; ++i) {
    const LabeledPoint& p = cloud.points[nv.ids[i]];
    const Vec3 rel = (position(p) - voxel.origin) / d;
    nv.coords(i, 0) = std::clamp(rel.x, 0.0, 1.0);
    nv.coords(i, 1) = std::clamp(rel.y, 0.0, 1.0);
    nv.coords(i, 2) = std::clamp(rel.z, 0.0, 1.0);
    nv.labels[i] = p.label;

    const double values[4] = {static_cast<double>(p.r), static_cast<double>(p.g),
                              static_cast<double>(p.b),
                              static_cast<double>(p.intensity)};
    for (std::size_t f = 0; f < channels.size(); ++f) {
      const int ch = channels[f];
      const double lo = stats.feature_min[ch];
      const double hi = stats.feature_max[ch];
      if (hi <= lo) {
        if (warnings && !warned[ch]) {
          static const char* kChannelNames[4] = {"r", "g", "b", "intensity"};
          warnings->push_back(std::string("constant feature '") + kChannelNames[ch] +
                              "' emitted as 0.5");
          warned[ch] = 1;
        }
        nv.features(i, static_cast<int>(f)) = 0.5;
      } else {
        nv.features(i, static_cast<int>(f)) =
            std::clamp((values[ch] - lo) / (hi - lo), 0.0, 1.0);
      }
    }
  }
  return nv;
}

NormalizedVoxel perturb(const NormalizedVoxel& voxel, std::uint64_t seed) {
  NormalizedVoxel out = voxel;
  Rng rng(seed);
  for (int i = 0; i < out.coords.rows; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double offset_m = std::clamp(0.001 * rng.normal(), -0.005, 0.005);
      out.coords(i, c) += offset_m / out.edge;
    }
  }
  return out;
}

PointCloud translate_cloud(const PointCloud& cloud, int axis, double offset) {
  PointCloud out = cloud;
  for (auto& p : out.points) {
    switch (axis) {
      case 0: p.x = static_cast<float>(p.x + offset); break;
      case 1: p.y = static_cast<float>(p.y + offset); break;
      default: p.z = static_cast<float>(p.z + offset); break;
    }
  }
  return out;
}

std::vector<PointCloud> translate_augment(const PointCloud& cloud, int copies,
                                          double max_offset, std::uint64_t seed) {
  std::vector<PointCloud> out;
  out.reserve(copies);
  Rng rng(seed);
  for (int i = 0; i < copies; ++i) {
    const int axis = static_cast<int>(rng.below(3));
    const double offset = rng.uniform(0.0, max_offset);
    PointCloud copy = translate_cloud(cloud, axis, offset);
    copy.tag = cloud.tag + "+t" + std::to_string(i);
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace ptcrack
