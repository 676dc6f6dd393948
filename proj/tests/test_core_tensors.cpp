#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "js3c/coord_index.hpp"
#include "js3c/ops.hpp"
#include "js3c/point_cloud.hpp"
#include "js3c/voxelize.hpp"
#include "support/oracles.hpp"

using js3c::PointCloud;
using js3c::Vec3;
using js3c::VolumeSpec;
using js3c::ad::Tensor;

namespace {

PointCloud random_cloud(long n, js3c::Rng& rng, const VolumeSpec& spec, long d = 2) {
  PointCloud c;
  const Vec3 hi = spec.max_corner();
  for (long i = 0; i < n; ++i)
    c.positions.emplace_back(js3c::uniform(rng, spec.origin.x(), hi.x()),
                             js3c::uniform(rng, spec.origin.y(), hi.y()),
                             js3c::uniform(rng, spec.origin.z(), hi.z()));
  c.features = Tensor::randn({n, d}, rng);
  return c;
}

}  // namespace

TEST_CASE("pose compose and inverse round trip") {
  js3c::Rng rng(11);
  js3c::Pose a = js3c::Pose::rotation_z(0.7);
  a.translation = Vec3(1.0, -2.0, 0.5);
  js3c::Pose b = js3c::Pose::rotation_z(-1.3);
  b.translation = Vec3(0.2, 0.0, -4.0);

  const Vec3 p(js3c::uniform(rng, -5, 5), js3c::uniform(rng, -5, 5),
               js3c::uniform(rng, -5, 5));
  const Vec3 via_compose = a.compose(b).apply(p);
  const Vec3 via_steps = a.apply(b.apply(p));
  CHECK((via_compose - via_steps).norm() <= 1e-12);

  const Vec3 back = a.inverse().apply(a.apply(p));
  CHECK((back - p).norm() <= 1e-12);
}

TEST_CASE("single point voxelizes to the containing cell") {
  VolumeSpec spec;
  spec.origin = Vec3(0, 0, 0);
  spec.voxel_size = 1.0;
  spec.dims = {4, 4, 4};
  PointCloud c;
  c.positions.emplace_back(2.5, 0.5, 3.5);
  c.features = Tensor({1, 0});
  auto res = js3c::voxelize_points(c, spec);
  REQUIRE(res.tensor.num_sites() == 1);
  CHECK(res.tensor.coords[0] == std::array<int, 3>{2, 0, 3});
  CHECK(res.map.point_to_voxel[0] == 0);
}

TEST_CASE("voxel features average their member points") {
  VolumeSpec spec;
  spec.voxel_size = 2.0;
  spec.dims = {2, 2, 2};
  PointCloud c;
  c.positions.emplace_back(0.5, 0.5, 0.5);
  c.positions.emplace_back(1.5, 1.5, 1.5);
  c.positions.emplace_back(3.0, 0.5, 0.5);
  c.features = Tensor({3, 1}, {2.0, 4.0, 10.0});
  auto res = js3c::voxelize_points(c, spec);
  REQUIRE(res.tensor.num_sites() == 2);
  CHECK(res.tensor.features.data[0] == 3.0);   // mean of 2 and 4
  CHECK(res.tensor.features.data[1] == 10.0);
}

TEST_CASE("out-of-bounds point raises a contract error naming its index") {
  VolumeSpec spec;
  spec.voxel_size = 1.0;
  spec.dims = {2, 2, 2};
  PointCloud c;
  c.positions.emplace_back(0.5, 0.5, 0.5);
  c.positions.emplace_back(5.0, 0.5, 0.5);
  c.features = Tensor({2, 0});
  try {
    js3c::voxelize_points(c, spec);
    FAIL("expected contract error");
  } catch (const js3c::contract_error& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("voxelize then devoxelize is identity on voxel-constant data") {
  VolumeSpec spec;
  spec.voxel_size = 0.5;
  spec.dims = {8, 8, 8};
  js3c::Rng rng(12);
  // Give every point of a voxel the same feature value so the mean is exact.
  PointCloud c = random_cloud(60, rng, spec, 0);
  std::vector<double> feat(60);
  for (long i = 0; i < 60; ++i) {
    const auto cell = spec.cell_of(c.positions[static_cast<std::size_t>(i)]);
    feat[static_cast<std::size_t>(i)] = static_cast<double>(spec.linear(cell));
  }
  c.features = Tensor({60, 1}, std::vector<double>(feat));

  auto res = js3c::voxelize_points(c, spec);
  js3c::ad::Tape tape;
  const int vf = tape.leaf(res.tensor.features);
  const int pf = js3c::devoxelize(tape, vf, res.map);
  for (long i = 0; i < 60; ++i)
    CHECK(tape.val(pf).data[i] == feat[static_cast<std::size_t>(i)]);
}

TEST_CASE("translating the origin by whole voxels shifts indices exactly") {
  VolumeSpec spec;
  spec.voxel_size = 0.25;
  spec.dims = {16, 16, 16};
  js3c::Rng rng(13);
  PointCloud c = random_cloud(200, rng, spec, 0);

  auto base = js3c::voxelize_points_unbounded(c, spec.origin, spec.voxel_size);
  const int k = 3;
  const Vec3 shifted = spec.origin + k * spec.voxel_size * Vec3(1, 1, 1);
  auto moved = js3c::voxelize_points_unbounded(c, shifted, spec.voxel_size);

  REQUIRE(base.tensor.num_sites() == moved.tensor.num_sites());
  for (long v = 0; v < base.tensor.num_sites(); ++v) {
    const auto& a = base.tensor.coords[static_cast<std::size_t>(v)];
    const auto& b = moved.tensor.coords[static_cast<std::size_t>(v)];
    CHECK(b == std::array<int, 3>{a[0] - k, a[1] - k, a[2] - k});
  }
}

TEST_CASE("majority vote: plurality, tie to smallest id, zeros ignored") {
  js3c::PointVoxelMap map;
  map.point_to_voxel = {0, 0, 0, 1, 1, 2, 3};
  map.voxel_to_points = {{0, 1, 2}, {3, 4}, {5}, {6}};
  // voxel 0: labels 2,2,5 -> 2; voxel 1: tie 3 vs 1 -> 1; voxel 2: only 0 -> 0;
  // voxel 3: 0 beside nothing else -> 0.
  std::vector<std::int32_t> labels = {2, 2, 5, 3, 1, 0, 0};
  auto v = js3c::majority_vote_labels(labels, map);
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 2);
  CHECK(v[1] == 1);
  CHECK(v[2] == 0);
  CHECK(v[3] == 0);
}

TEST_CASE("majority vote ignores zeros unless a voxel is all zeros") {
  js3c::PointVoxelMap map;
  map.point_to_voxel = {0, 0, 0};
  map.voxel_to_points = {{0, 1, 2}};
  std::vector<std::int32_t> labels = {0, 0, 7};
  CHECK(js3c::majority_vote_labels(labels, map)[0] == 7);
}

TEST_CASE("majority vote agrees with the histogram oracle on random data") {
  js3c::Rng rng(14);
  VolumeSpec spec;
  spec.voxel_size = 1.0;
  spec.dims = {3, 3, 3};
  for (int trial = 0; trial < 30; ++trial) {
    PointCloud c = random_cloud(40, rng, spec, 0);
    std::vector<std::int32_t> labels(40);
    for (auto& l : labels)
      l = static_cast<std::int32_t>(js3c::uniform(rng, 0.0, 4.999));
    auto res = js3c::voxelize_points(c, spec);
    auto got = js3c::majority_vote_labels(labels, res.map);
    for (std::size_t v = 0; v < res.map.voxel_to_points.size(); ++v) {
      std::vector<std::int32_t> member_labels;
      for (long p : res.map.voxel_to_points[v])
        member_labels.push_back(labels[static_cast<std::size_t>(p)]);
      CHECK(got[v] == oracles::vote(member_labels));
    }
  }
}

TEST_CASE("coordinate index survives adversarial low-bit coordinate sets") {
  // Coordinates differing only in high bits collide badly under weak hashes.
  std::vector<std::array<int, 3>> coords;
  for (int i = 0; i < 512; ++i)
    coords.push_back({i << 8, (i << 8) + 256, -(i << 8)});
  js3c::CoordIndex idx(coords);
  for (int i = 0; i < 512; ++i)
    CHECK(idx.find(coords[static_cast<std::size_t>(i)]) == i);
  CHECK(idx.find({1, 2, 3}) == -1);
  CHECK(idx.find({(1 << 8) + 1, (1 << 8) + 256, -(1 << 8)}) == -1);
}

TEST_CASE("duplicate coordinates are rejected") {
  std::vector<std::array<int, 3>> coords = {{1, 2, 3}, {4, 5, 6}, {1, 2, 3}};
  CHECK_THROWS_AS(js3c::CoordIndex{coords}, js3c::contract_error);
}

TEST_CASE("voxel rows are lexicographically ordered and unique") {
  js3c::Rng rng(15);
  VolumeSpec spec;
  spec.voxel_size = 0.5;
  spec.dims = {6, 6, 6};
  PointCloud c = random_cloud(300, rng, spec, 0);
  auto res = js3c::voxelize_points(c, spec);
  for (long v = 1; v < res.tensor.num_sites(); ++v)
    CHECK(res.tensor.coords[static_cast<std::size_t>(v - 1)] <
          res.tensor.coords[static_cast<std::size_t>(v)]);
  // Every point maps into the voxel that contains it.
  for (long p = 0; p < c.size(); ++p) {
    const auto cell = spec.cell_of(c.positions[static_cast<std::size_t>(p)]);
    const long v = res.map.point_to_voxel[static_cast<std::size_t>(p)];
    CHECK(res.tensor.coords[static_cast<std::size_t>(v)] ==
          std::array<int, 3>{static_cast<int>(cell[0]), static_cast<int>(cell[1]),
                             static_cast<int>(cell[2])});
  }
}
