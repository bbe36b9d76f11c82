#include "ptcrack/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ptcrack/rng.hpp"

namespace ptcrack {

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double lattice_gradient(std::uint64_t seed, long long ix, long long iy, double dx,
                        double dy) {
  const std::uint64_t h = hash_combine(
      seed, hash_combine(static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy)));
  const double angle =
      static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 * 3.14159265358979323846;
  return std::cos(angle) * dx + std::sin(angle) * dy;
}

double gradient_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<long long>(fx);
  const auto iy = static_cast<long long>(fy);
  const double dx = x - fx;
  const double dy = y - fy;
  const double u = fade(dx);
  const double v = fade(dy);
  const double n00 = lattice_gradient(seed, ix, iy, dx, dy);
  const double n10 = lattice_gradient(seed, ix + 1, iy, dx - 1.0, dy);
  const double n01 = lattice_gradient(seed, ix, iy + 1, dx, dy - 1.0);
  const double n11 = lattice_gradient(seed, ix + 1, iy + 1, dx - 1.0, dy - 1.0);
  const double nx0 = n00 + u * (n10 - n00);
  const double nx1 = n01 + u * (n11 - n01);
  return nx0 + v * (nx1 - nx0);
}

// Signed query against a polyline footprint: nearest segment in the xy
// plane, lateral offset, interpolated width, and the outward direction.
struct FootprintHit {
  double lateral_abs = 0.0;  // unsigned distance to the centerline
  double width = 0.0;        // interpolated local width
  double side = 1.0;         // which side of the centerline
  Vec3 closest;              // on the centerline, z = 0
  Vec3 normal;               // unit, in-plane, pointing toward the query
};

FootprintHit footprint_query(const CrackSpec& spec, double x, double y) {
  FootprintHit best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < spec.path.size(); ++s) {
    const double ax = spec.path[s].x, ay = spec.path[s].y;
    const double bx = spec.path[s + 1].x, by = spec.path[s + 1].y;
    const double ex = bx - ax, ey = by - ay;
    const double len2 = ex * ex + ey * ey;
    double u = len2 > 0.0 ? ((x - ax) * ex + (y - ay) * ey) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double cx = ax + u * ex, cy = ay + u * ey;
    const double dx = x - cx, dy = y - cy;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best.lateral_abs = std::sqrt(d2);
      best.width = spec.widths[s] + u * (spec.widths[s + 1] - spec.widths[s]);
      const double cross = ex * dy - ey * dx;
      best.side = cross >= 0.0 ? 1.0 : -1.0;
      best.closest = {cx, cy, 0.0};
      if (best.lateral_abs > 1e-12) {
        best.normal = {dx / best.lateral_abs, dy / best.lateral_abs, 0.0};
      } else {
        // on the centerline: fall back to the segment's left normal
        const double len = std::sqrt(len2);
        best.normal = len > 0.0 ? Vec3{-ey / len, ex / len, 0.0} : Vec3{1.0, 0.0, 0.0};
      }
    }
  }
  return best;
}

std::uint8_t scale_channel(std::uint8_t v, double factor) {
  return static_cast<std::uint8_t>(
      std::clamp(std::lround(static_cast<double>(v) * factor), 0l, 255l));
}

void validate_crack_spec(const CrackSpec& spec, const SurfaceSpec& surface) {
  if (spec.path.size() < 2) throw data_error("crack path needs at least 2 waypoints");
  if (spec.widths.size() != spec.path.size()) {
    throw data_error("crack width profile must have one width per waypoint");
  }
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < spec.path.size(); ++i) {
    const double dx = spec.path[i + 1].x - spec.path[i].x;
    const double dy = spec.path[i + 1].y - spec.path[i].y;
    length += std::sqrt(dx * dx + dy * dy);
  }
  if (!(length > 0.0)) throw data_error("crack path has zero length");
  for (std::size_t i = 0; i < spec.path.size(); ++i) {
    if (!(spec.widths[i] > 0.0)) throw data_error("crack widths must be > 0");
    const double half = spec.widths[i] / 2.0;
    if (spec.path[i].x - half < 0.0 || spec.path[i].x + half > surface.extent_x ||
        spec.path[i].y - half < 0.0 || spec.path[i].y + half > surface.extent_y) {
      throw data_error("crack footprint outside surface extent");
    }
  }
  if (!(spec.depth > 0.0)) throw data_error("crack depth must be > 0");
  if (spec.darkening < 0.0 || spec.darkening > 1.0) {
    throw data_error("darkening must be in [0,1]");
  }
  if (!(spec.keep_ratio > 0.0 && spec.keep_ratio <= 1.0)) {
    throw data_error("keep ratio must be in (0,1]");
  }
  if (spec.instance_id < 1) throw data_error("instance id must be >= 1");
}

}  // namespace

double fractal_noise(double x, double y, int octaves, std::uint64_t seed) {
  double amplitude = 1.0;
  double frequency = 1.0;
  double sum = 0.0;
  double norm = 0.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amplitude * gradient_noise(x * frequency, y * frequency,
                                      hash_combine(seed, static_cast<std::uint64_t>(o)));
    norm += amplitude;
    amplitude *= 0.5;
    frequency *= 2.0;
  }
  return norm > 0.0 ? sum / norm : 0.0;
}

PointCloud generate_surface(const SurfaceSpec& spec) {
  if (!(spec.extent_x > 0.0) || !(spec.extent_y > 0.0)) {
    throw data_error("surface extent must be positive");
  }
  if (!(spec.density > 0.0)) throw data_error("surface density must be positive");
  if (spec.roughness_octaves < 0) throw data_error("octave count must be >= 0");

  const auto count =
      static_cast<std::size_t>(std::llround(spec.density * spec.extent_x * spec.extent_y));
  Rng rng(spec.seed);
  const std::uint64_t height_seed = hash_combine(spec.seed, 0x68656967687400ULL);

  PointCloud cloud;
  cloud.tag = spec.tag;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LabeledPoint p;
    const double x = rng.uniform(0.0, spec.extent_x);
    const double y = rng.uniform(0.0, spec.extent_y);
    double z = 0.0;
    if (spec.roughness_amplitude > 0.0 && spec.roughness_octaves > 0) {
      z = spec.roughness_amplitude * fractal_noise(x / spec.roughness_scale,
                                                   y / spec.roughness_scale,
                                                   spec.roughness_octaves, height_seed);
    }
    z += spec.noise_sigma * rng.uniform(-1.0, 1.0);
    p.x = static_cast<float>(x);
    p.y = static_cast<float>(y);
    p.z = static_cast<float>(z);

    const double bright = 1.0 + spec.color_variation * rng.uniform(-1.0, 1.0);
    p.r = scale_channel(spec.base_color[0], bright);
    p.g = scale_channel(spec.base_color[1], bright);
    p.b = scale_channel(spec.base_color[2], bright);
    const double mean_rgb = (p.r + p.g + p.b) / 3.0 / 255.0;
    p.intensity = static_cast<float>(mean_rgb * 0.9 + 0.05 + 0.02 * rng.uniform(-1.0, 1.0));
    p.label = 0;
    p.gt_instance = 0;
    p.id = static_cast<std::uint32_t>(i);
    cloud.points.push_back(p);
  }
  return cloud;
}

CarveResult carve_crack(const PointCloud& cloud, const CrackSpec& spec,
                        const SurfaceSpec& surface, std::uint64_t seed) {
  validate_crack_spec(spec, surface);

  CarveResult result;
  result.cloud.tag = cloud.tag;
  result.cloud.points.reserve(cloud.size());
  Rng rng(seed);

  long long labeled = 0;
  for (const LabeledPoint& original : cloud.points) {
    const FootprintHit hit = footprint_query(spec, original.x, original.y);
    if (hit.lateral_abs > hit.width / 2.0) {
      LabeledPoint p = original;
      p.id = static_cast<std::uint32_t>(result.cloud.points.size());
      result.cloud.points.push_back(p);
      continue;
    }

    // interior: thin out, then land on a wall or the floor
    if (!rng.chance(spec.keep_ratio)) continue;
    LabeledPoint p = original;
    const double wall_area = 2.0 * spec.depth;
    const double wall_probability = wall_area / (wall_area + hit.width);
    if (rng.chance(wall_probability)) {
      // jitter pulls inward only, keeping the lateral spread within the width
      const double lateral = hit.width / 2.0 - rng.uniform(0.0, surface.noise_sigma);
      const Vec3 xy = hit.closest + hit.normal * (hit.side * lateral);
      p.x = static_cast<float>(xy.x);
      p.y = static_cast<float>(xy.y);
      p.z = static_cast<float>(original.z - rng.uniform(0.0, spec.depth));
    } else {
      p.z = static_cast<float>(original.z - spec.depth +
                               surface.noise_sigma * rng.uniform(-1.0, 1.0));
    }
    const double factor = 1.0 - spec.darkening;
    p.r = scale_channel(p.r, factor);
    p.g = scale_channel(p.g, factor);
    p.b = scale_channel(p.b, factor);
    p.intensity = static_cast<float>(p.intensity * factor);
    p.label = 1;
    p.gt_instance = spec.instance_id;
    p.id = static_cast<std::uint32_t>(result.cloud.points.size());
    result.cloud.points.push_back(p);
    ++labeled;
  }

  CrackTruth& truth = result.truth;
  truth.instance_id = spec.instance_id;
  truth.surface_tag = cloud.tag;
  truth.width_min = *std::min_element(spec.widths.begin(), spec.widths.end());
  truth.width_max = *std::max_element(spec.widths.begin(), spec.widths.end());
  double sum = 0.0;
  for (double w : spec.widths) sum += w;
  truth.width_mean = sum / static_cast<double>(spec.widths.size());
  truth.length = 0.0;
  for (std::size_t i = 0; i + 1 < spec.path.size(); ++i) {
    const double dx = spec.path[i + 1].x - spec.path[i].x;
    const double dy = spec.path[i + 1].y - spec.path[i].y;
    truth.length += std::sqrt(dx * dx + dy * dy);
  }
  truth.point_count = labeled;
  return result;
}

long long SyntheticDataset::total_points() const {
  long long total = 0;
  for (const auto& c : clouds) total += static_cast<long long>(c.size());
  return total;
}

long long SyntheticDataset::crack_points() const {
  long long total = 0;
  for (const auto& c : clouds) {
    for (const auto& p : c.points) {
      if (p.label != 0) ++total;
    }
  }
  return total;
}

SyntheticDataset generate_dataset(const DatasetSpec& spec) {
  if (spec.surfaces < 1 || spec.cracks_per_surface < 0) {
    throw data_error("dataset spec needs at least one surface");
  }
  if (!(spec.width_min > 0.0) || spec.width_max < spec.width_min) {
    throw data_error("width range must satisfy 0 < min <= max");
  }
  if (!(spec.length_min > 0.0) || spec.length_max < spec.length_min) {
    throw data_error("length range must satisfy 0 < min <= max");
  }

  SyntheticDataset dataset;
  const int total_cracks = spec.surfaces * spec.cracks_per_surface;
  int next_instance = 1;

  for (int s = 0; s < spec.surfaces; ++s) {
    SurfaceSpec sspec = spec.surface;
    sspec.seed = hash_combine(spec.seed, 0x73757266ULL + static_cast<std::uint64_t>(s));
    sspec.tag = spec.surface.tag + "_" + std::to_string(s);
    PointCloud cloud = generate_surface(sspec);

    Rng rng(hash_combine(spec.seed, 0x706c6163ULL + static_cast<std::uint64_t>(s)));
    std::vector<std::vector<Vec3>> placed;  // sampled footprints for separation
    for (int k = 0; k < spec.cracks_per_surface; ++k) {
      const int global = s * spec.cracks_per_surface + k;
      // log-spaced base widths cover the whole range across the dataset
      const double t = total_cracks > 1
                           ? (static_cast<double>(global) + 0.5) / total_cracks
                           : 0.5;
      const double base_width =
          spec.width_min * std::pow(spec.width_max / spec.width_min, t);

      CrackSpec crack;
      bool ok = false;
      for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
        const double margin = 0.05 + base_width;
        const double length = rng.uniform(spec.length_min, spec.length_max);
        const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double x0 = rng.uniform(margin, sspec.extent_x - margin);
        const double y0 = rng.uniform(margin, sspec.extent_y - margin);
        const Vec3 dir{std::cos(theta), std::sin(theta), 0.0};
        const Vec3 mid{x0 + dir.x * length / 2.0 - dir.y * 0.1 * length,
                       y0 + dir.y * length / 2.0 + dir.x * 0.1 * length, 0.0};
        const Vec3 end{x0 + dir.x * length, y0 + dir.y * length, 0.0};

        crack.path = {{x0, y0, 0.0}, mid, end};
        crack.widths.clear();
        for (int w = 0; w < 3; ++w) {
          crack.widths.push_back(std::clamp(
              base_width * (1.0 + 0.15 * rng.uniform(-1.0, 1.0)), spec.width_min,
              spec.width_max));
        }
        crack.depth = rng.uniform(spec.depth_min, spec.depth_max);
        crack.darkening = rng.uniform(spec.darkening_min, spec.darkening_max);
        crack.keep_ratio = spec.keep_ratio;
        crack.instance_id = next_instance;

        bool inside = true;
        for (std::size_t i = 0; i < crack.path.size() && inside; ++i) {
          const double half = crack.widths[i] / 2.0 + 0.02;
          inside = crack.path[i].x - half >= 0.0 &&
                   crack.path[i].x + half <= sspec.extent_x &&
                   crack.path[i].y - half >= 0.0 &&
                   crack.path[i].y + half <= sspec.extent_y;
        }
        if (!inside) continue;

        // sample the candidate path and keep it clear of earlier cracks
        std::vector<Vec3> samples;
        for (std::size_t i = 0; i + 1 < crack.path.size(); ++i) {
          for (int u = 0; u <= 8; ++u) {
            const double f = u / 8.0;
            samples.push_back(crack.path[i] + (crack.path[i + 1] - crack.path[i]) * f);
          }
        }
        bool clear = true;
        for (const auto& other : placed) {
          for (const Vec3& a : samples) {
            for (const Vec3& b : other) {
              const double dx = a.x - b.x, dy = a.y - b.y;
              if (dx * dx + dy * dy <
                  spec.min_separation * spec.min_separation) {
                clear = false;
                break;
              }
            }
            if (!clear) break;
          }
          if (!clear) break;
        }
        if (!clear) continue;

        placed.push_back(std::move(samples));
        ok = true;
      }
      if (!ok) {
        throw data_error("could not place crack " + std::to_string(next_instance) +
                         " on " + sspec.tag + "; extent too crowded");
      }

      CarveResult carved = carve_crack(
          cloud, crack, sspec,
          hash_combine(spec.seed, 0x63727600ULL + static_cast<std::uint64_t>(next_instance)));
      cloud = std::move(carved.cloud);
      dataset.manifest.push_back(carved.truth);
      ++next_instance;
    }
    dataset.clouds.push_back(std::move(cloud));
  }
  return dataset;
}

void write_manifest(const std::vector<CrackTruth>& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out << "instance\tsurface\twidth_min\twidth_mean\twidth_max\tlength\tpoints\n";
  char buf[256];
  for (const auto& row : manifest) {
    std::snprintf(buf, sizeof buf, "%d\t%s\t%.9g\t%.9g\t%.9g\t%.9g\t%lld\n",
                  row.instance_id, row.surface_tag.c_str(), row.width_min,
                  row.width_mean, row.width_max, row.length, row.point_count);
    out << buf;
  }
}

std::vector<CrackTruth> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + " is empty");
  std::vector<CrackTruth> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CrackTruth row;
    if (!(ls >> row.instance_id >> row.surface_tag >> row.width_min >>
          row.width_mean >> row.width_max >> row.length >> row.point_count)) {
      throw data_error("malformed manifest line: " + line);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace ptcrack
