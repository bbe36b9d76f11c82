#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ptcrack/types.hpp"

namespace ptcrack {

// A carved crack: a polyline footprint with a per-waypoint width profile.
// Interior points are pushed onto two walls and a floor, thinned out, and
// darkened, which reproduces the sparse dark concave look of real cracks.
struct CrackSpec {
  std::vector<Vec3> path;      // waypoints; x,y define the footprint
  std::vector<double> widths;  // meters, one per waypoint, > 0
  double depth = 0.08;         // meters below the surface
  double darkening = 0.5;      // 0 = colors untouched, 1 = black
  double keep_ratio = 0.5;     // fraction of interior points kept
  int instance_id = 1;
};

struct SurfaceSpec {
  double extent_x = 2.0, extent_y = 2.0;  // meters
  double density = 5000.0;                // points per square meter
  double roughness_amplitude = 0.08;      // meters
  int roughness_octaves = 4;
  double roughness_scale = 0.8;           // base feature wavelength, meters
  std::array<std::uint8_t, 3> base_color{{155, 140, 120}};
  double color_variation = 0.15;
  double noise_sigma = 0.002;  // bounded sensor jitter, meters
  std::uint64_t seed = 1;
  std::string tag = "surface";
};

// Fractal lattice-gradient noise, roughly in [-0.7, 0.7], stateless per seed.
double fractal_noise(double x, double y, int octaves, std::uint64_t seed);

// Points sampled on a fractal height field with the requested density.
// Colors follow the base distribution; intensity tracks brightness. All
// labels 0. Deterministic per seed.
PointCloud generate_surface(const SurfaceSpec& spec);

// Analytic ground truth of one carved crack.
struct CrackTruth {
  int instance_id = 0;
  std::string surface_tag;
  double width_min = 0.0, width_mean = 0.0, width_max = 0.0;  // meters
  double length = 0.0;                                        // meters
  long long point_count = 0;
};

struct CarveResult {
  PointCloud cloud;
  CrackTruth truth;
};

// Carves the crack into the cloud: interior points move onto the walls or
// the floor, a fraction is dropped, colors darken, labels and the instance
// id are set. Throws data_error when the footprint leaves the surface.
CarveResult carve_crack(const PointCloud& cloud, const CrackSpec& spec,
                        const SurfaceSpec& surface, std::uint64_t seed);

struct DatasetSpec {
  int surfaces = 5;
  int cracks_per_surface = 6;
  SurfaceSpec surface;  // template; per-surface tags and seeds are derived
  double width_min = 0.005, width_max = 0.10;    // meters; spanned log-uniformly
  double length_min = 0.5, length_max = 1.2;     // meters
  double depth_min = 0.05, depth_max = 0.10;     // meters
  double darkening_min = 0.35, darkening_max = 0.60;
  double keep_ratio = 0.5;
  double min_separation = 0.30;  // meters between crack footprints
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  std::vector<PointCloud> clouds;
  std::vector<CrackTruth> manifest;  // one row per crack, instance ids unique

  long long total_points() const;
  long long crack_points() const;
};

// Deterministic multi-surface dataset with globally unique instance ids and
// crack widths spread across [width_min, width_max].
SyntheticDataset generate_dataset(const DatasetSpec& spec);

void write_manifest(const std::vector<CrackTruth>& manifest, const std::string& path);
std::vector<CrackTruth> read_manifest(const std::string& path);

}  // namespace ptcrack
