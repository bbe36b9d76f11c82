#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ptcrack/voxelizer.hpp"
#include "test_util.hpp"

using namespace ptcrack;

namespace {

PointCloud octant_cloud() {
  PointCloud cloud;
  cloud.tag = "octants";
  int id = 0;
  for (double x : {0.25, 0.75}) {
    for (double y : {0.25, 0.75}) {
      for (double z : {0.25, 0.75}) {
        LabeledPoint p;
        p.x = static_cast<float>(x);
        p.y = static_cast<float>(y);
        p.z = static_cast<float>(z);
        p.id = static_cast<std::uint32_t>(id++);
        cloud.points.push_back(p);
      }
    }
  }
  return cloud;
}

// exact containment: origin <= coordinate < origin + edge on every axis
bool contains(const Voxel& v, const LabeledPoint& p, double edge) {
  return v.origin.x <= p.x && p.x < v.origin.x + edge &&
         v.origin.y <= p.y && p.y < v.origin.y + edge &&
         v.origin.z <= p.z && p.z < v.origin.z + edge;
}

}  // namespace

TEST_CASE("octant cloud partitions into one voxel per point") {
  const PointCloud cloud = octant_cloud();
  const auto voxels = build_grid(cloud, {0.5, 8, 0.5});
  REQUIRE(voxels.size() == 8);
  for (const auto& v : voxels) CHECK(v.member_ids.size() == 1);
}

TEST_CASE("overlapping grid membership equals brute-force containment") {
  const PointCloud cloud = octant_cloud();
  const VoxelizationConfig config{0.5, 8, 0.25};
  const auto voxels = build_grid(cloud, config);

  std::size_t total_membership = 0;
  for (const auto& v : voxels) {
    CHECK_FALSE(v.member_ids.empty());
    // every listed member is truly inside
    for (auto id : v.member_ids) CHECK(contains(v, cloud.points[id], config.edge));
    // no point inside is missing
    for (const auto& p : cloud.points) {
      const bool inside = contains(v, p, config.edge);
      const bool listed = std::binary_search(v.member_ids.begin(),
                                             v.member_ids.end(), p.id);
      CHECK(inside == listed);
    }
    total_membership += v.member_ids.size();
  }
  CHECK(total_membership > cloud.size());  // overlap duplicates membership
}

TEST_CASE("documented stride sweep values are accepted") {
  const PointCloud cloud = testutil::random_cloud(200, 9, 1.0);
  const double d = 0.5;
  for (double s : {d, 0.35 * d, 0.30 * d, 0.25 * d}) {
    const auto voxels = build_grid(cloud, {d, 8, s});
    CHECK_FALSE(voxels.empty());
  }
}

TEST_CASE("stride equal to edge partitions the cloud") {
  for (std::uint64_t seed : {4ull, 5ull, 6ull}) {
    const PointCloud cloud = testutil::random_cloud(2000, seed);
    const auto voxels = build_grid(cloud, {0.7, 8, 0.7});
    std::set<std::uint32_t> seen;
    std::size_t total = 0;
    for (const auto& v : voxels) {
      for (auto id : v.member_ids) {
        CHECK(seen.insert(id).second);  // no duplicates
        ++total;
      }
    }
    CHECK(total == cloud.size());  // no omissions
  }
}

TEST_CASE("filter and fill enforces the fixed sample count") {
  const PointCloud cloud = testutil::random_cloud(400, 21, 0.5);
  std::vector<Voxel> voxels(3);
  // 3n points, exactly n, and n-1
  for (int k = 0; k < 3; ++k) {
    voxels[k].index = {k, 0, 0};
    voxels[k].origin = {-1.0, -1.0, -1.0};
    voxels[k].source_tag = cloud.tag;
  }
  for (std::uint32_t id = 0; id < 96; ++id) voxels[0].member_ids.push_back(id);
  for (std::uint32_t id = 96; id < 128; ++id) voxels[1].member_ids.push_back(id);
  for (std::uint32_t id = 128; id < 159; ++id) voxels[2].member_ids.push_back(id);

  const auto kept = filter_and_fill(voxels, cloud, 32, 99);
  REQUIRE(kept.size() == 2);  // the 31-point voxel is discarded

  CHECK(kept[0].member_ids.size() == 32);
  const std::set<std::uint32_t> original(voxels[0].member_ids.begin(),
                                         voxels[0].member_ids.end());
  for (auto id : kept[0].member_ids) CHECK(original.count(id) == 1);

  CHECK(kept[1].member_ids == voxels[1].member_ids);  // exact n passes through
}

TEST_CASE("reconstruct merges overlapping voxels by maximum") {
  PointCloud cloud = testutil::random_cloud(4, 31);
  ScoredVoxel a, b;
  a.voxel.member_ids = {0, 1};
  a.confidences = {0.3f, 0.6f};
  b.voxel.member_ids = {1, 2};
  b.confidences = {0.8f, 0.2f};

  const AnnotationLayer ann = reconstruct(cloud, {a, b});
  CHECK(ann.confidence[0] == 0.3f);
  CHECK(ann.confidence[1] == 0.8f);  // covered twice, max wins
  CHECK(ann.confidence[2] == 0.2f);
  CHECK(ann.confidence[3] == 0.0f);
  CHECK(ann.unclassified[3] == 1);  // never scored
  CHECK(ann.unclassified[1] == 0);

  // voxel order does not matter
  const AnnotationLayer swapped = reconstruct(cloud, {b, a});
  CHECK(swapped.confidence == ann.confidence);
  CHECK(swapped.unclassified == ann.unclassified);
}

TEST_CASE("reconstruct rejects out-of-cloud ids and bad confidences") {
  PointCloud cloud = testutil::random_cloud(3, 32);
  ScoredVoxel bad_id;
  bad_id.voxel.member_ids = {7};
  bad_id.confidences = {0.5f};
  CHECK_THROWS_AS(reconstruct(cloud, {bad_id}), data_error);

  ScoredVoxel bad_conf;
  bad_conf.voxel.member_ids = {0};
  bad_conf.confidences = {1.5f};
  CHECK_THROWS_AS(reconstruct(cloud, {bad_conf}), data_error);
}

TEST_CASE("single-source confidences survive reconstruction unchanged") {
  const PointCloud cloud = testutil::random_cloud(500, 33);
  const auto voxels = build_grid(cloud, {0.8, 8, 0.8});
  std::vector<ScoredVoxel> scored;
  Rng rng(5);
  for (const auto& v : voxels) {
    ScoredVoxel sv;
    sv.voxel = v;
    for (std::size_t i = 0; i < v.member_ids.size(); ++i) {
      sv.confidences.push_back(static_cast<float>(rng.uniform()));
    }
    scored.push_back(std::move(sv));
  }
  const AnnotationLayer ann = reconstruct(cloud, scored);
  for (const auto& sv : scored) {
    for (std::size_t i = 0; i < sv.voxel.member_ids.size(); ++i) {
      CHECK(ann.confidence[sv.voxel.member_ids[i]] == sv.confidences[i]);
    }
  }
}

TEST_CASE("empty cloud is rejected") {
  CHECK_THROWS_AS(build_grid(PointCloud{}, {0.5, 8, 0.5}), data_error);
}
