#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ptcrack/downsampler.hpp"
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

std::vector<std::uint32_t> all_ids(const PointCloud& cloud) {
  std::vector<std::uint32_t> ids;
  for (const auto& p : cloud.points) ids.push_back(p.id);
  return ids;
}

// brute-force reference binning with the same half-open convention
std::map<std::array<int, 3>, std::set<std::uint32_t>> brute_force_bins(
    const PointCloud& cloud, const std::vector<std::uint32_t>& ids, int grid) {
  double lo[3] = {1e300, 1e300, 1e300};
  double hi[3] = {-1e300, -1e300, -1e300};
  for (auto id : ids) {
    const Vec3 p = position(cloud.points[id]);
    const double v[3] = {p.x, p.y, p.z};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  }
  std::map<std::array<int, 3>, std::set<std::uint32_t>> bins;
  for (auto id : ids) {
    const Vec3 p = position(cloud.points[id]);
    const double v[3] = {p.x, p.y, p.z};
    std::array<int, 3> cell{};
    for (int a = 0; a < 3; ++a) {
      const double extent = hi[a] - lo[a];
      int c = extent > 0.0 ? static_cast<int>((v[a] - lo[a]) / extent * grid) : 0;
      cell[a] = std::clamp(c, 0, grid - 1);
    }
    bins[cell].insert(id);
  }
  return bins;
}

}  // namespace

TEST_CASE("octant points occupy one cell each at grid 2") {
  const PointCloud cloud = octant_cloud();
  const auto groups = cell_partition(cloud, all_ids(cloud), 2);
  REQUIRE(groups.size() == 8);
  for (const auto& g : groups) CHECK(g.member_ids.size() == 1);
}

TEST_CASE("identical points collapse into a single cell") {
  PointCloud cloud;
  for (int i = 0; i < 20; ++i) {
    LabeledPoint p;
    p.x = p.y = p.z = 1.0f;
    p.id = static_cast<std::uint32_t>(i);
    cloud.points.push_back(p);
  }
  for (int grid : {1, 2, 7}) {
    const auto groups = cell_partition(cloud, all_ids(cloud), grid);
    REQUIRE(groups.size() == 1);
    CHECK(groups.front().member_ids.size() == 20);
  }
}

TEST_CASE("cell partition equals brute-force binning") {
  const PointCloud cloud = testutil::random_cloud(1000, 77);
  const auto ids = all_ids(cloud);
  const auto groups = cell_partition(cloud, ids, 5);
  const auto oracle = brute_force_bins(cloud, ids, 5);
  REQUIRE(groups.size() == oracle.size());
  for (const auto& g : groups) {
    const auto it = oracle.find(g.cell);
    REQUIRE(it != oracle.end());
    CHECK(std::set<std::uint32_t>(g.member_ids.begin(), g.member_ids.end()) ==
          it->second);
  }
}

TEST_CASE("downsampling n distinct points to n is the identity") {
  const PointCloud cloud = testutil::random_cloud(64, 5);
  const auto ids = all_ids(cloud);
  const auto out = downsample(cloud, ids, 64, 123);
  CHECK(out == ids);
}

TEST_CASE("isolated sparse points survive") {
  // dense blob plus 10 points far away, each in its own lattice region
  PointCloud cloud;
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    LabeledPoint p;
    p.x = static_cast<float>(rng.uniform(0.0, 0.5));
    p.y = static_cast<float>(rng.uniform(0.0, 0.5));
    p.z = static_cast<float>(rng.uniform(0.0, 0.5));
    p.id = static_cast<std::uint32_t>(i);
    cloud.points.push_back(p);
  }
  std::vector<std::uint32_t> isolated;
  for (int k = 0; k < 10; ++k) {
    LabeledPoint p;
    p.x = static_cast<float>(6.0 + 2.0 * k);
    p.y = static_cast<float>(6.0 + 1.5 * k);
    p.z = 6.0f;
    p.id = static_cast<std::uint32_t>(1000 + k);
    isolated.push_back(p.id);
    cloud.points.push_back(p);
  }

  const auto out = downsample(cloud, all_ids(cloud), 100, 7);
  const std::set<std::uint32_t> kept(out.begin(), out.end());
  for (auto id : isolated) CHECK(kept.count(id) == 1);
}

TEST_CASE("sparse minority retention beats uniform sampling") {
  // 1% minority cluster; average retention compared over seeded trials
  const int trials = 20;
  double mean_adaptive = 0.0, mean_uniform = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    PointCloud cloud;
    Rng gen(900 + trial);
    for (int i = 0; i < 990; ++i) {
      LabeledPoint p;
      p.x = static_cast<float>(gen.uniform(0.0, 0.35));
      p.y = static_cast<float>(gen.uniform(0.0, 0.35));
      p.z = static_cast<float>(gen.uniform(0.0, 0.35));
      p.id = static_cast<std::uint32_t>(i);
      cloud.points.push_back(p);
    }
    std::set<std::uint32_t> minority;
    for (int k = 0; k < 10; ++k) {
      LabeledPoint p;
      p.x = static_cast<float>(0.6 + gen.uniform() * 0.4);
      p.y = static_cast<float>(0.6 + gen.uniform() * 0.4);
      p.z = static_cast<float>(0.6 + gen.uniform() * 0.4);
      p.id = static_cast<std::uint32_t>(990 + k);
      minority.insert(p.id);
      cloud.points.push_back(p);
    }
    const auto ids = all_ids(cloud);

    const auto adaptive = downsample(cloud, ids, 100, 555 + trial);
    int kept_adaptive = 0;
    for (auto id : adaptive) kept_adaptive += minority.count(id);

    Rng uniform_rng(555 + trial);
    auto pool = ids;
    uniform_rng.shuffle(pool);
    int kept_uniform = 0;
    for (int i = 0; i < 100; ++i) kept_uniform += minority.count(pool[i]);

    mean_adaptive += kept_adaptive / 10.0;
    mean_uniform += kept_uniform / 10.0;
  }
  mean_adaptive /= trials;
  mean_uniform /= trials;
  CHECK(mean_adaptive > mean_uniform);
}

TEST_CASE("output invariants hold on random voxels") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng gen(seed * 31);
    const int n = 8 + static_cast<int>(gen.below(40));
    const auto count = static_cast<std::size_t>(n + gen.below(3 * n));
    const PointCloud cloud = testutil::random_cloud(count, seed);
    const auto ids = all_ids(cloud);

    const auto detail = downsample_detailed(cloud, ids, n, seed);
    CHECK(detail.selected.size() == static_cast<std::size_t>(n));
    CHECK(detail.groups.size() == static_cast<std::size_t>(n));
    CHECK(std::is_sorted(detail.selected.begin(), detail.selected.end()));
    const std::set<std::uint32_t> id_set(ids.begin(), ids.end());
    for (auto id : detail.selected) CHECK(id_set.count(id) == 1);

    // deterministic per seed
    CHECK(downsample(cloud, ids, n, seed) == detail.selected);

    // permuting the input presentation does not change the result
    auto shuffled = ids;
    Rng(seed + 1).shuffle(shuffled);
    CHECK(downsample(cloud, shuffled, n, seed) == detail.selected);

    // every emitted point minimizes distance to its group centroid
    for (std::size_t g = 0; g < detail.groups.size(); ++g) {
      const auto& group = detail.groups[g];
      Vec3 centroid{};
      for (auto id : group.member_ids) centroid += position(cloud.points[id]);
      centroid = centroid / static_cast<double>(group.member_ids.size());
      double best = 1e300;
      std::uint32_t best_id = group.member_ids.front();
      for (auto id : group.member_ids) {
        const double d2 = distance2(position(cloud.points[id]), centroid);
        if (d2 < best) {
          best = d2;
          best_id = id;
        }
      }
      CHECK(detail.emitted[g] == best_id);
    }
  }
}

TEST_CASE("merge bookkeeping accounts for every absorbed cell") {
  const PointCloud cloud = testutil::random_cloud(400, 17);
  const auto ids = all_ids(cloud);
  const auto detail = downsample_detailed(cloud, ids, 64, 3);
  const auto pre_merge = cell_partition(cloud, ids, detail.grid);
  std::size_t absorbed = 0;
  for (const auto& g : detail.groups) absorbed += g.merged_from.size();
  CHECK(pre_merge.size() - detail.groups.size() == absorbed);
}

TEST_CASE("error cases") {
  const PointCloud cloud = testutil::random_cloud(20, 3);
  CHECK_THROWS_WITH_AS(downsample(cloud, all_ids(cloud), 21, 1),
                       doctest::Contains("insufficient points"), data_error);

  PointCloud dupes;
  for (int i = 0; i < 30; ++i) {
    LabeledPoint p;
    p.x = static_cast<float>(i % 4);  // only 4 distinct positions
    p.id = static_cast<std::uint32_t>(i);
    dupes.points.push_back(p);
  }
  std::vector<std::uint32_t> ids;
  for (const auto& p : dupes.points) ids.push_back(p.id);
  CHECK_THROWS_WITH_AS(downsample(dupes, ids, 8, 1),
                       doctest::Contains("distinct"), data_error);
}
