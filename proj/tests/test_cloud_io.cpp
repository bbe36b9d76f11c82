#include <doctest.h>

#include <cstring>
#include <fstream>

#include "ptcrack/cloud_io.hpp"
#include "test_util.hpp"

using namespace ptcrack;
using testutil::TempDir;

namespace {

bool same_float(float a, float b) {
  return std::memcmp(&a, &b, sizeof(float)) == 0;
}

bool clouds_identical(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a.points[i];
    const auto& q = b.points[i];
    if (!same_float(p.x, q.x) || !same_float(p.y, q.y) || !same_float(p.z, q.z)) {
      return false;
    }
    if (p.r != q.r || p.g != q.g || p.b != q.b) return false;
    if (!same_float(p.intensity, q.intensity)) return false;
    if (p.label != q.label || p.gt_instance != q.gt_instance || p.id != q.id) {
      return false;
    }
  }
  return true;
}

AnnotationLayer random_annotations(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  AnnotationLayer ann;
  ann.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    ann.confidence[i] = static_cast<float>(rng.uniform());
    ann.predicted_label[i] = rng.chance(0.3) ? 1 : 0;
    ann.cluster_id[i] = rng.chance(0.5) ? static_cast<std::int32_t>(rng.below(5)) : -1;
  }
  return ann;
}

}  // namespace

TEST_CASE("three-vertex ascii file maps directly") {
  TempDir dir("io_ascii");
  const std::string path = dir.file("three.ply");
  std::ofstream(path) <<
      "ply\n"
      "format ascii 1.0\n"
      "element vertex 3\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property float intensity\nproperty uchar label\n"
      "end_header\n"
      "0 0 0 10 20 30 0.5 0\n"
      "1 0 0 40 50 60 0.25 1\n"
      "0 1 0 70 80 90 0.75 0\n";

  const PointCloud cloud = read_cloud(path);
  REQUIRE(cloud.size() == 3);
  CHECK(cloud.points[0].id == 0);
  CHECK(cloud.points[1].id == 1);
  CHECK(cloud.points[2].id == 2);
  CHECK(cloud.points[1].x == 1.0f);
  CHECK(cloud.points[1].label == 1);
  CHECK(cloud.points[2].g == 80);
  CHECK(cloud.points[2].intensity == 0.75f);
}

TEST_CASE("missing label property defaults to zero with a warning") {
  TempDir dir("io_nolabel");
  const std::string path = dir.file("nolabel.ply");
  std::ofstream(path) <<
      "ply\nformat ascii 1.0\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\n"
      "end_header\n"
      "0 0 0\n1 1 1\n";

  const CloudFile file = read_cloud_file(path);
  REQUIRE(file.cloud.size() == 2);
  CHECK(file.cloud.points[0].label == 0);
  CHECK(file.cloud.points[1].label == 0);
  bool warned = false;
  for (const auto& w : file.warnings) {
    if (w.find("label") != std::string::npos) warned = true;
  }
  CHECK(warned);
}

TEST_CASE("round trip is field-exact in both formats") {
  TempDir dir("io_roundtrip");
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const PointCloud cloud = testutil::random_cloud(200 + seed * 13, seed);
    const AnnotationLayer ann = random_annotations(cloud.size(), seed + 99);
    for (PlyFormat format : {PlyFormat::binary_little_endian, PlyFormat::ascii}) {
      const std::string path = dir.file("c.ply");
      write_cloud(cloud, path, &ann, format);
      const CloudFile back = read_cloud_file(path);
      CHECK(clouds_identical(cloud, back.cloud));
      REQUIRE(back.annotations.has_value());
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(same_float(back.annotations->confidence[i], ann.confidence[i]));
        CHECK(back.annotations->predicted_label[i] == ann.predicted_label[i]);
        CHECK(back.annotations->cluster_id[i] == ann.cluster_id[i]);
      }
    }
  }
}

TEST_CASE("empty cloud writes a valid zero-vertex file") {
  TempDir dir("io_empty");
  PointCloud empty;
  empty.tag = "empty";
  const std::string path = dir.file("empty.ply");
  write_cloud(empty, path);
  CHECK(read_cloud(path).size() == 0);
}

TEST_CASE("malformed header names the offending line") {
  TempDir dir("io_badheader");
  const std::string path = dir.file("bad.ply");
  std::ofstream(path) << "ply\nformat ascii 1.0\nelement vertex 1\nbogus line here\n";
  CHECK_THROWS_WITH_AS(read_cloud(path),
                       doctest::Contains("bogus line here"), data_error);
}

TEST_CASE("non-finite coordinate reports the vertex index") {
  TempDir dir("io_nan");
  const std::string path = dir.file("nan.ply");
  std::ofstream(path) <<
      "ply\nformat ascii 1.0\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\n"
      "end_header\n"
      "0 0 0\nnan 0 0\n";
  CHECK_THROWS_WITH_AS(read_cloud(path), doctest::Contains("vertex 1"), data_error);
}

TEST_CASE("unknown property is skipped with a warning") {
  TempDir dir("io_unknown");
  const std::string path = dir.file("extra.ply");
  std::ofstream(path) <<
      "ply\nformat ascii 1.0\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property float curvature\n"
      "end_header\n"
      "1 2 3 0.9\n";
  const CloudFile file = read_cloud_file(path);
  CHECK(file.cloud.points[0].z == 3.0f);
  bool warned = false;
  for (const auto& w : file.warnings) {
    if (w.find("curvature") != std::string::npos) warned = true;
  }
  CHECK(warned);
}

TEST_CASE("confusion export recolors exactly the three outcome classes") {
  PointCloud cloud;
  cloud.tag = "confusion";
  for (int i = 0; i < 4; ++i) {
    LabeledPoint p;
    p.r = p.g = p.b = 100;
    p.label = i < 2 ? 1 : 0;  // points 0,1 are real cracks
    p.id = static_cast<std::uint32_t>(i);
    cloud.points.push_back(p);
  }
  // predictions: tp, fn, fp, tn
  const std::vector<std::uint8_t> predicted = {1, 0, 1, 0};
  const PointCloud colored = confusion_colored(cloud, predicted);
  CHECK(colored.points[0].b == 255);  // true positive: blue
  CHECK(colored.points[0].r == 0);
  CHECK(colored.points[1].r == 255);  // false negative: red
  CHECK(colored.points[1].b == 0);
  CHECK(colored.points[2].g == 255);  // false positive: cyan
  CHECK(colored.points[2].b == 255);
  CHECK(colored.points[2].r == 0);
  CHECK(colored.points[3].r == 100);  // true negative keeps its color
}

TEST_CASE("glob expansion is deterministic and lexicographic") {
  TempDir dir("io_glob");
  for (const char* name : {"b.ply", "a.ply", "c.ply"}) {
    write_cloud(PointCloud{}, dir.file(name));
  }
  const auto paths = expand_globs({dir.file("*.ply")});
  REQUIRE(paths.size() == 3);
  CHECK(paths[0] == dir.file("a.ply"));
  CHECK(paths[1] == dir.file("b.ply"));
  CHECK(paths[2] == dir.file("c.ply"));
  CHECK_THROWS_AS(expand_globs({dir.file("*.xyz")}), data_error);
}
