#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "js3c/errors.hpp"
#include "js3c/ops.hpp"
#include "js3c/pvi.hpp"
#include "js3c/rng.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using js3c::KnnGraph;
using js3c::Vec3;
using js3c::VolumeSpec;
using js3c::VoxelCenters;
using js3c::ad::Tape;
using js3c::ad::Tensor;
namespace ops = js3c::ad::ops;

namespace {

constexpr std::uint64_t kSeed = 0x50564953ull;

std::vector<Vec3> random_points(long n, double lo, double hi, js3c::Rng& rng) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    pts.emplace_back(js3c::uniform(rng, lo, hi), js3c::uniform(rng, lo, hi),
                     js3c::uniform(rng, lo, hi));
  return pts;
}

// Weight set for one refinement layer, all leaves on the given tape.
js3c::ad::pvi::LayerNodes random_layer(Tape& t, long point_dim, long feat_dim,
                                       long width, long out_dim, js3c::Rng& rng) {
  js3c::ad::pvi::LayerNodes ln;
  const double s = 0.4;
  ln.proj_w = t.leaf(Tensor::randn({point_dim, feat_dim}, rng, s));
  ln.proj_b = t.leaf(Tensor::randn({feat_dim}, rng, s));
  const long edge_dim = 6 + 2 * feat_dim;
  ln.w1 = t.leaf(Tensor::randn({edge_dim, width}, rng, s));
  ln.b1 = t.leaf(Tensor::randn({width}, rng, s));
  ln.w2 = t.leaf(Tensor::randn({width, width}, rng, s));
  ln.b2 = t.leaf(Tensor::randn({width}, rng, s));
  ln.w3 = t.leaf(Tensor::randn({width, out_dim}, rng, s));
  ln.b3 = t.leaf(Tensor::randn({out_dim}, rng, s));
  return ln;
}

}  // namespace

TEST_CASE("voxel centers: argmax against empty channel, ties stay empty") {
  VolumeSpec spec;
  spec.dims = {3, 2, 2};
  spec.voxel_size = 0.5;
  spec.origin = Vec3(1.0, -2.0, 0.25);

  Tensor logits({2, 2, 3, 3});  // {dz, dy, dx, C+1}, all zeros: ties -> empty
  // cell (x=2, y=0, z=1): channel 2 wins
  const long c1 = spec.linear(2, 0, 1);
  logits.data[c1 * 3 + 2] = 1.5;
  // cell (x=0, y=1, z=0): channel 1 wins
  const long c2 = spec.linear(0, 1, 0);
  logits.data[c2 * 3 + 1] = 0.25;
  // cell (x=1, y=1, z=1): channel 1 exactly ties channel 0 -> stays empty
  const long c3 = spec.linear(1, 1, 1);
  logits.data[c3 * 3 + 0] = 0.7;
  logits.data[c3 * 3 + 1] = 0.7;
  // cell (x=0, y=0, z=0): empty channel dominates
  logits.data[spec.linear(0, 0, 0) * 3 + 0] = 3.0;

  const VoxelCenters vc = js3c::extract_voxel_centers(logits, spec);
  REQUIRE(vc.cells.size() == 2);
  // cells come out in linear (x-fastest) scan order
  CHECK(vc.cells[0] == c2);
  CHECK(vc.cells[1] == c1);
  CHECK(vc.positions[0].isApprox(Vec3(1.25, -1.25, 0.5)));
  CHECK(vc.positions[1].isApprox(Vec3(2.25, -1.75, 1.0)));
}

TEST_CASE("voxel centers: shape validation") {
  VolumeSpec spec;
  spec.dims = {3, 2, 2};
  CHECK_THROWS_AS(js3c::extract_voxel_centers(Tensor::zeros({2, 2, 2, 3}), spec),
                  js3c::contract_error);
  CHECK_THROWS_AS(js3c::extract_voxel_centers(Tensor::zeros({2, 2, 3, 1}), spec),
                  js3c::contract_error);
}

TEST_CASE("grid knn matches brute force on random instances") {
  for (int inst = 0; inst < 30; ++inst) {
    js3c::Rng rng(js3c::derive_seed(kSeed, 100 + inst));
    const long n = 8 + static_cast<long>(rng() % 400);
    const int k = 1 + static_cast<int>(rng() % 7);
    std::vector<Vec3> pts = random_points(n, -5.0, 5.0, rng);
    // clustering stresses uneven bucket occupancy
    if (inst % 3 == 0)
      for (std::size_t i = 0; i < pts.size() / 2; ++i) pts[i] *= 0.05;
    std::vector<Vec3> queries = random_points(20, -8.0, 8.0, rng);
    queries.push_back(pts[0]);  // exactly on a point
    const KnnGraph g = js3c::knn_query(queries, pts, k);
    REQUIRE(g.neighbors.size() == queries.size() * static_cast<std::size_t>(k));
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto want = oracles::brute_knn(queries[q], pts, k);
      for (int j = 0; j < k; ++j)
        CHECK(g.neighbors[q * static_cast<std::size_t>(k) +
                          static_cast<std::size_t>(j)] == want[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("knn distance ties resolve to the smaller point index") {
  std::vector<Vec3> pts = {Vec3(5, 5, 5), Vec3(1, 0, 0), Vec3(-1, 0, 0),
                           Vec3(1, 0, 0),  // duplicate of index 1
                           Vec3(9, 9, 9)};
  const std::vector<Vec3> q = {Vec3(0, 0, 0)};
  const KnnGraph g = js3c::knn_query(q, pts, 3);
  // indices 1, 2, 3 are all at distance 1; ordering is (distance, index)
  CHECK(g.neighbors == std::vector<long>{1, 2, 3});
}

TEST_CASE("knn handles degenerate distributions via the fallback scan") {
  std::vector<Vec3> pts(6, Vec3(2.0, -1.0, 3.0));  // zero spread
  pts[4] = Vec3(2.0, -1.0, 3.5);
  const KnnGraph g = js3c::knn_query({Vec3(2.0, -1.0, 3.4)}, pts, 2);
  CHECK(g.neighbors == std::vector<long>{4, 0});

  // k equal to the whole point set
  js3c::Rng rng(js3c::derive_seed(kSeed, 7));
  const std::vector<Vec3> all = random_points(5, 0.0, 1.0, rng);
  const KnnGraph g2 = js3c::knn_query({Vec3(0.5, 0.5, 0.5)}, all, 5);
  const auto want = oracles::brute_knn(Vec3(0.5, 0.5, 0.5), all, 5);
  CHECK(std::vector<long>(g2.neighbors.begin(), g2.neighbors.end()) == want);
}

TEST_CASE("knn validates its inputs") {
  const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
  CHECK_THROWS_AS(js3c::knn_query({Vec3(0, 0, 0)}, pts, 3), js3c::contract_error);
  CHECK_THROWS_AS(js3c::knn_query({Vec3(0, 0, 0)}, {}, 1), js3c::contract_error);
  CHECK_THROWS_AS(js3c::knn_brute(Vec3(0, 0, 0), pts, 0), js3c::contract_error);
}

namespace {

struct RefineFixture {
  VolumeSpec spec;
  Tensor volume;
  std::vector<Vec3> points;
  Tensor point_feats;
  VoxelCenters centers;
  KnnGraph graph;
  long channels = 3;  // C+1

  explicit RefineFixture(std::uint64_t stream, int k = 3) {
    spec.dims = {4, 3, 2};
    spec.voxel_size = 0.5;
    spec.origin = Vec3(0.0, 0.0, 0.0);
    js3c::Rng rng(js3c::derive_seed(kSeed, stream));
    volume = Tensor::randn({2, 3, 4, channels}, rng);
    points = random_points(12, 0.0, 1.5, rng);
    point_feats = Tensor::randn({12, 4}, rng);
    centers = js3c::extract_voxel_centers(volume, spec);
    REQUIRE(!centers.cells.empty());
    graph = js3c::knn_query(centers.positions, points, k);
  }
};

}  // namespace

TEST_CASE("refine with a zero head is a bitwise identity") {
  RefineFixture fx(21);
  Tape t;
  const int vol = t.leaf(fx.volume);
  const int pf = t.leaf(fx.point_feats);
  js3c::Rng rng(js3c::derive_seed(kSeed, 22));
  js3c::ad::pvi::PviNodes nodes;
  nodes.layers.push_back(random_layer(t, 4, fx.channels, 8, 8, rng));
  nodes.layers.push_back(random_layer(t, 4, 8, 8, 8, rng));
  nodes.head_w = t.leaf(Tensor::zeros({8, fx.channels}));
  nodes.head_b = t.leaf(Tensor::zeros({fx.channels}));

  const int out = js3c::ad::pvi::refine(t, vol, fx.spec, fx.centers, fx.graph,
                                        fx.points, pf, nodes, 0.01);
  const Tensor& y = t.val(out);
  REQUIRE(y.shape == fx.volume.shape);
  for (long i = 0; i < y.numel(); ++i) CHECK(y.data[i] == fx.volume.data[i]);
}

TEST_CASE("refine without any centers returns the input node unchanged") {
  VolumeSpec spec;
  spec.dims = {2, 2, 2};
  Tensor vol = Tensor::zeros({2, 2, 2, 3});
  for (long c = 0; c < 8; ++c) vol.data[c * 3] = 1.0;  // empty dominates
  const VoxelCenters vc = js3c::extract_voxel_centers(vol, spec);
  CHECK(vc.cells.empty());

  Tape t;
  const int v = t.leaf(vol);
  js3c::Rng rng(js3c::derive_seed(kSeed, 31));
  js3c::ad::pvi::PviNodes nodes;
  nodes.layers.push_back(random_layer(t, 4, 3, 8, 8, rng));
  nodes.head_w = t.leaf(Tensor::randn({8, 3}, rng));
  nodes.head_b = t.leaf(Tensor::randn({3}, rng));
  const int pf = t.leaf(Tensor::randn({5, 4}, rng));
  const std::vector<Vec3> pts = random_points(5, 0.0, 1.0, rng);
  const KnnGraph empty_graph{2, {}};
  CHECK(js3c::ad::pvi::refine(t, v, spec, vc, empty_graph, pts, pf, nodes, 0.01) == v);
}

TEST_CASE("refined logits are invariant to neighbour order") {
  RefineFixture fx(41, 4);

  auto run = [&](const KnnGraph& graph) {
    Tape t;
    const int vol = t.leaf(fx.volume);
    const int pf = t.leaf(fx.point_feats);
    js3c::Rng rng(js3c::derive_seed(kSeed, 42));
    js3c::ad::pvi::PviNodes nodes;
    nodes.layers.push_back(random_layer(t, 4, fx.channels, 8, 6, rng));
    nodes.head_w = t.leaf(Tensor::randn({6, fx.channels}, rng));
    nodes.head_b = t.leaf(Tensor::randn({fx.channels}, rng));
    const int out = js3c::ad::pvi::refine(t, vol, fx.spec, fx.centers, graph,
                                          fx.points, pf, nodes, 0.01);
    return t.val(out);
  };

  const Tensor base = run(fx.graph);
  js3c::Rng perm_rng(js3c::derive_seed(kSeed, 43));
  for (int trial = 0; trial < 3; ++trial) {
    KnnGraph shuffled = fx.graph;
    for (std::size_t c = 0; c * shuffled.k < shuffled.neighbors.size(); ++c) {
      auto begin = shuffled.neighbors.begin() +
                   static_cast<long>(c) * shuffled.k;
      std::shuffle(begin, begin + shuffled.k, perm_rng);
    }
    const Tensor permuted = run(shuffled);
    REQUIRE(permuted.numel() == base.numel());
    for (long i = 0; i < base.numel(); ++i)
      CHECK(permuted.data[i] == base.data[i]);
  }
}

TEST_CASE("refine gradients match central differences") {
  RefineFixture fx(51, 2);
  js3c::Rng rng(js3c::derive_seed(kSeed, 52));

  // leaf order: volume, point feats, layer weights, head
  std::vector<Tensor> leaves;
  leaves.push_back(fx.volume);
  leaves.push_back(fx.point_feats);
  const long width = 5, out_dim = 4;
  const double s = 0.4;
  leaves.push_back(Tensor::randn({4, fx.channels}, rng, s));        // proj_w
  leaves.push_back(Tensor::randn({fx.channels}, rng, s));           // proj_b
  leaves.push_back(Tensor::randn({6 + 2 * fx.channels, width}, rng, s));
  leaves.push_back(Tensor::randn({width}, rng, s));
  leaves.push_back(Tensor::randn({width, width}, rng, s));
  leaves.push_back(Tensor::randn({width}, rng, s));
  leaves.push_back(Tensor::randn({width, out_dim}, rng, s));
  leaves.push_back(Tensor::randn({out_dim}, rng, s));
  leaves.push_back(Tensor::randn({out_dim, fx.channels}, rng, s));  // head_w
  leaves.push_back(Tensor::randn({fx.channels}, rng, s));           // head_b

  auto build = [&](Tape& t, const std::vector<Tensor>& lv) {
    std::vector<int> ids;
    for (const Tensor& l : lv) {
      const int id = t.leaf(l);
      ids.push_back(id);
    }
    js3c::ad::pvi::PviNodes nodes;
    js3c::ad::pvi::LayerNodes ln;
    ln.proj_w = ids[2];
    ln.proj_b = ids[3];
    ln.w1 = ids[4];
    ln.b1 = ids[5];
    ln.w2 = ids[6];
    ln.b2 = ids[7];
    ln.w3 = ids[8];
    ln.b3 = ids[9];
    nodes.layers.push_back(ln);
    nodes.head_w = ids[10];
    nodes.head_b = ids[11];
    const int refined = js3c::ad::pvi::refine(t, ids[0], fx.spec, fx.centers,
                                              fx.graph, fx.points, ids[1],
                                              nodes, 0.01);
    // squared sum keeps every output element in the loss with distinct weight
    const int sq = ops::mul_elem(t, refined, refined);
    return ops::reduce_sum(t, sq);
  };

  const auto res = gradcheck::check(build, leaves);
  CAPTURE(res.worst);
  CHECK(res.checked > 100);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("two stacked layers keep gradients consistent") {
  RefineFixture fx(61, 2);
  js3c::Rng rng(js3c::derive_seed(kSeed, 62));

  const long w1 = 4, f1 = 5, w2 = 4, f2 = 3;
  std::vector<Tensor> leaves;
  leaves.push_back(fx.volume);
  leaves.push_back(fx.point_feats);
  const double s = 0.4;
  auto push_layer = [&](long in_feat, long width, long out_feat) {
    leaves.push_back(Tensor::randn({4, in_feat}, rng, s));
    leaves.push_back(Tensor::randn({in_feat}, rng, s));
    leaves.push_back(Tensor::randn({6 + 2 * in_feat, width}, rng, s));
    leaves.push_back(Tensor::randn({width}, rng, s));
    leaves.push_back(Tensor::randn({width, width}, rng, s));
    leaves.push_back(Tensor::randn({width}, rng, s));
    leaves.push_back(Tensor::randn({width, out_feat}, rng, s));
    leaves.push_back(Tensor::randn({out_feat}, rng, s));
  };
  push_layer(fx.channels, w1, f1);
  push_layer(f1, w2, f2);
  leaves.push_back(Tensor::randn({f2, fx.channels}, rng, s));
  leaves.push_back(Tensor::randn({fx.channels}, rng, s));

  auto build = [&](Tape& t, const std::vector<Tensor>& lv) {
    std::vector<int> ids;
    for (const Tensor& l : lv) {
      const int id = t.leaf(l);
      ids.push_back(id);
    }
    js3c::ad::pvi::PviNodes nodes;
    for (int layer = 0; layer < 2; ++layer) {
      js3c::ad::pvi::LayerNodes ln;
      const int base = 2 + layer * 8;
      ln.proj_w = ids[base];
      ln.proj_b = ids[base + 1];
      ln.w1 = ids[base + 2];
      ln.b1 = ids[base + 3];
      ln.w2 = ids[base + 4];
      ln.b2 = ids[base + 5];
      ln.w3 = ids[base + 6];
      ln.b3 = ids[base + 7];
      nodes.layers.push_back(ln);
    }
    nodes.head_w = ids[18];
    nodes.head_b = ids[19];
    const int refined = js3c::ad::pvi::refine(t, ids[0], fx.spec, fx.centers,
                                              fx.graph, fx.points, ids[1],
                                              nodes, 0.01);
    return ops::reduce_sum(t, refined);
  };

  const auto res = gradcheck::check(build, leaves);
  CAPTURE(res.worst);
  CHECK(res.max_rel_err < 1e-6);
}
