#include <doctest.h>

#include <algorithm>

#include "ptcrack/types.hpp"

using namespace ptcrack;

namespace {

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
  return std::any_of(violations.begin(), violations.end(), [&](const std::string& v) {
    return v.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("reference configuration is valid") {
  VoxelizationConfig voxel{0.5, 2048, 0.5};
  ClusteringConfig clustering{0.59, 0.04, 20};
  MatchConfig match{0.5};
  CHECK(validate_config(voxel, clustering, match).empty());
}

TEST_CASE("stride larger than the edge is rejected") {
  VoxelizationConfig voxel{0.5, 2048, 0.6};
  const auto violations = validate_voxel_config(voxel);
  REQUIRE(violations.size() == 1);
  CHECK(mentions(violations, "s > d"));
}

TEST_CASE("stride equal to the edge means no overlap and is fine") {
  VoxelizationConfig voxel{0.25, 64, 0.25};
  CHECK(validate_voxel_config(voxel).empty());
}

TEST_CASE("voxel sample count below 8 is rejected") {
  VoxelizationConfig voxel{0.5, 7, 0.5};
  CHECK(mentions(validate_voxel_config(voxel), "n must be >= 8"));
}

TEST_CASE("clustering invariants") {
  CHECK(validate_clustering_config({0.59, 0.04, 20}).empty());
  CHECK_FALSE(validate_clustering_config({0.0, 0.04, 20}).empty());
  CHECK_FALSE(validate_clustering_config({1.5, 0.04, 20}).empty());
  CHECK_FALSE(validate_clustering_config({0.5, -1.0, 20}).empty());
  CHECK_FALSE(validate_clustering_config({0.5, 0.04, 0}).empty());
}

TEST_CASE("match fraction bounds") {
  CHECK(validate_match_config({1.0}).empty());
  CHECK_FALSE(validate_match_config({0.0}).empty());
  CHECK_FALSE(validate_match_config({1.5}).empty());
}

TEST_CASE("require_valid throws with every violation listed") {
  VoxelizationConfig voxel{0.5, 4, 0.6};
  ClusteringConfig clustering{0.0, 0.04, 20};
  MatchConfig match{0.5};
  CHECK_THROWS_AS(require_valid(voxel, clustering, match), data_error);
  try {
    require_valid(voxel, clustering, match);
  } catch (const data_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("s > d") != std::string::npos);
    CHECK(msg.find("n must be >= 8") != std::string::npos);
    CHECK(msg.find("confidence threshold") != std::string::npos);
  }
}
