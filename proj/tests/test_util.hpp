#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "ptcrack/rng.hpp"
#include "ptcrack/types.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("ptcrack_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline ptcrack::PointCloud random_cloud(std::size_t count, std::uint64_t seed,
                                        double extent = 2.0) {
  ptcrack::Rng rng(seed);
  ptcrack::PointCloud cloud;
  cloud.tag = "random" + std::to_string(seed);
  for (std::size_t i = 0; i < count; ++i) {
    ptcrack::LabeledPoint p;
    p.x = static_cast<float>(rng.uniform(-extent, extent));
    p.y = static_cast<float>(rng.uniform(-extent, extent));
    p.z = static_cast<float>(rng.uniform(-extent, extent));
    p.r = static_cast<std::uint8_t>(rng.below(256));
    p.g = static_cast<std::uint8_t>(rng.below(256));
    p.b = static_cast<std::uint8_t>(rng.below(256));
    p.intensity = static_cast<float>(rng.uniform());
    p.label = rng.chance(0.2) ? 1 : 0;
    p.gt_instance = p.label ? static_cast<std::int32_t>(1 + rng.below(3)) : 0;
    p.id = static_cast<std::uint32_t>(i);
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace testutil
