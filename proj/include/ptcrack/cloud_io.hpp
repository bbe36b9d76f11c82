#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptcrack/types.hpp"

namespace ptcrack {

// Per-point results of classification and clustering, parallel to a cloud.
struct AnnotationLayer {
  std::vector<float> confidence;             // [0,1]
  std::vector<std::uint8_t> predicted_label; // {0,1}
  std::vector<std::int32_t> cluster_id;      // -1 = no cluster
  // Set for points that fell in no retained voxel and were never scored.
  // In-memory only; not serialized.
  std::vector<std::uint8_t> unclassified;

  std::size_t size() const { return confidence.size(); }
  void resize(std::size_t n) {
    confidence.assign(n, 0.0f);
    predicted_label.assign(n, 0);
    cluster_id.assign(n, -1);
    unclassified.assign(n, 0);
  }
};

enum class PlyFormat { ascii, binary_little_endian };

struct CloudFile {
  PointCloud cloud;
  std::optional<AnnotationLayer> annotations;
  std::vector<std::string> warnings;
};

// Reads a PLY vertex cloud. Points keep file order, ids are 0..N-1.
// Missing optional properties (intensity, label, ...) default to 0 with a
// warning. Throws data_error on malformed headers (naming the offending
// line) and on non-finite coordinates (naming the vertex index).
CloudFile read_cloud_file(const std::string& path);
PointCloud read_cloud(const std::string& path);

// Writes the cloud (and optionally its annotations) as PLY. The file is
// re-readable by read_cloud_file with identical field values.
void write_cloud(const PointCloud& cloud, const std::string& path,
                 const AnnotationLayer* annotations = nullptr,
                 PlyFormat format = PlyFormat::binary_little_endian);

// Copy of the cloud recolored by confusion class against the ground-truth
// labels: true positives blue, false negatives red, false positives cyan.
// Correctly rejected points keep their original color.
PointCloud confusion_colored(const PointCloud& cloud,
                             const std::vector<std::uint8_t>& predicted);

// Expands glob patterns deterministically (lexicographic order, duplicates
// removed). A pattern without matches is an error; a literal path is kept.
std::vector<std::string> expand_globs(const std::vector<std::string>& patterns);

}  // namespace ptcrack
