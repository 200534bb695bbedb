#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "xnet/graph.hpp"

using namespace xnet;

namespace {

// Independent shuffle oracle: raw engine, rejection sampling, Fisher-Yates.
std::vector<std::vector<Vertex>> oracle_permutations(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  auto below = [&](std::uint64_t m) {
    const std::uint64_t limit = (~std::uint64_t{0} - m + 1) % m;
    std::uint64_t x;
    do {
      x = eng();
    } while (x < limit);
    return x % m;
  };
  std::vector<std::vector<Vertex>> perms;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<Vertex> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Vertex>(i);
    for (std::size_t i = n - 1; i >= 1; --i) std::swap(p[i], p[below(i + 1)]);
    perms.push_back(p);
  }
  return perms;
}

void audit_degrees(const BipartiteGraph& g, std::size_t left, std::size_t right) {
  std::vector<std::size_t> rdeg(g.n_right(), 0);
  for (std::size_t u = 0; u < g.n_left(); ++u) {
    auto nb = g.neighbors(u);
    ASSERT_EQ(nb.size(), left);
    for (Vertex v : nb) {
      ASSERT_LT(v, g.n_right());
      ++rdeg[v];
    }
  }
  for (auto d : rdeg) ASSERT_EQ(d, right);
}

}  // namespace

TEST(RandomBipartite, DegreeEqualNForcesCompleteGraph) {
  const auto g = build_random_regular_bipartite(4, 4, 99, EdgeMode::dedup);
  for (std::size_t u = 0; u < 4; ++u) {
    auto nb = g.neighbors(u);
    EXPECT_EQ(std::vector<Vertex>(nb.begin(), nb.end()), (std::vector<Vertex>{0, 1, 2, 3}));
  }
  EXPECT_FALSE(g.has_parallel_edges());
}

TEST(RandomBipartite, LargeGraphIsExactlyRegular) {
  const auto g = build_random_regular_bipartite(1024, 8, 1);
  audit_degrees(g, 8, 8);
  EXPECT_EQ(g.right_regular_degree(), 8u);
}

TEST(RandomBipartite, MatchesSeededShuffleOracle) {
  const auto g = build_random_regular_bipartite(6, 2, 7);
  const auto perms = oracle_permutations(6, 2, 7);
  for (std::size_t u = 0; u < 6; ++u) {
    std::vector<Vertex> expected{perms[0][u], perms[1][u]};
    std::sort(expected.begin(), expected.end());
    auto nb = g.neighbors(u);
    EXPECT_EQ(std::vector<Vertex>(nb.begin(), nb.end()), expected) << "left vertex " << u;
  }
  audit_degrees(g, 2, 2);
}

TEST(RandomBipartite, ParallelEdgesAreFlagged) {
  bool saw_parallel = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = build_random_regular_bipartite(5, 3, seed);
    bool dup = false;
    for (std::size_t u = 0; u < 5; ++u) {
      auto nb = g.neighbors(u);
      dup |= std::adjacent_find(nb.begin(), nb.end()) != nb.end();
    }
    EXPECT_EQ(g.has_parallel_edges(), dup);
    saw_parallel |= dup;
  }
  EXPECT_TRUE(saw_parallel);
}

TEST(RandomBipartite, DedupIsSimpleAndRegular) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (std::size_t d : {2u, 5u, 9u, 10u}) {
      const auto g = build_random_regular_bipartite(10, d, seed, EdgeMode::dedup);
      EXPECT_FALSE(g.has_parallel_edges());
      audit_degrees(g, d, d);
    }
  }
}

TEST(RandomBipartite, Deterministic) {
  EXPECT_EQ(build_random_regular_bipartite(300, 6, 42), build_random_regular_bipartite(300, 6, 42));
  EXPECT_EQ(build_random_regular_bipartite(300, 6, 42).id(), build_random_regular_bipartite(300, 6, 42).id());
  EXPECT_NE(build_random_regular_bipartite(300, 6, 42).id(), build_random_regular_bipartite(300, 6, 43).id());
  EXPECT_EQ(build_random_regular_bipartite(64, 4, 5, EdgeMode::dedup),
            build_random_regular_bipartite(64, 4, 5, EdgeMode::dedup));
}

TEST(RandomBipartite, RejectsInvalidParameters) {
  EXPECT_THROW(build_random_regular_bipartite(0, 1, 1), InvalidParameter);
  EXPECT_THROW(build_random_regular_bipartite(4, 5, 1), InvalidParameter);
  EXPECT_THROW(build_random_regular_bipartite(4, 0, 1), InvalidParameter);
}

TEST(BipartiteGraph, RejectsOutOfRangeAndWrongSize) {
  EXPECT_THROW(BipartiteGraph(2, 2, 1, {0, 2}), InvalidParameter);
  EXPECT_THROW(BipartiteGraph(2, 2, 2, {0, 1, 0}), InvalidParameter);
}

TEST(Generators, AllTwoBitWords) {
  for (std::uint64_t seed : {0u, 1u, 77u}) {
    EXPECT_EQ(sample_generators(2, ExpanderBudget::with_count(3), seed), (std::vector<Word>{1, 2, 3}));
  }
}

TEST(Generators, DistinctNonzeroBytes) {
  const auto h = sample_generators(8, ExpanderBudget::with_count(40), 3);
  ASSERT_EQ(h.size(), 40u);
  std::set<Word> unique(h.begin(), h.end());
  EXPECT_EQ(unique.size(), 40u);
  EXPECT_EQ(unique.count(0), 0u);
  EXPECT_LT(*unique.rbegin(), 256u);
  EXPECT_EQ(h, sample_generators(8, ExpanderBudget::with_count(40), 3));
}

TEST(Generators, PigeonholeError) {
  EXPECT_THROW(sample_generators(4, ExpanderBudget::with_count(16), 0), InvalidParameter);
  EXPECT_NO_THROW(sample_generators(4, ExpanderBudget::with_count(15), 0));
}

TEST(Generators, LargeDimensionUsesSparseSampling) {
  const auto h = sample_generators(40, ExpanderBudget::with_count(1000), 11);
  std::set<Word> unique(h.begin(), h.end());
  EXPECT_EQ(unique.size(), 1000u);
  EXPECT_LT(*unique.rbegin(), Word{1} << 40);
}

TEST(Budget, FormulaAndLimits) {
  EXPECT_EQ(ExpanderBudget::for_dimension(8, 0.5, 0.35).generator_count, 90u);   // 0.35*64/0.25 = 89.6
  EXPECT_EQ(ExpanderBudget::for_dimension(10, 0.5, 0.35).generator_count, 140u);
  EXPECT_EQ(ExpanderBudget::for_dimension(10, 0.5, 1.0).generator_count, 400u);
  EXPECT_EQ(ExpanderBudget::for_dimension(10, 0.3, 0.35).generator_count, 389u);
  EXPECT_EQ(ExpanderBudget::for_dimension(5, 0.5, 0.25).generator_count, 25u);  // exact product, no round-up
  EXPECT_THROW(ExpanderBudget::for_dimension(8, 0.5, 1.0), InvalidParameter);  // 256 = 2^8
  EXPECT_THROW(ExpanderBudget::for_dimension(8, 0.0), InvalidParameter);
  EXPECT_THROW(ExpanderBudget::for_dimension(8, 1.0), InvalidParameter);
}

TEST(Cayley, FourCycle) {
  const auto g = build_cayley_xor_graph(2, {0b01, 0b10});
  EXPECT_EQ(g.neighbors(0b00), (std::vector<Word>{0b01, 0b10}));
  EXPECT_EQ(g.neighbors(0b01), (std::vector<Word>{0b00, 0b11}));
  EXPECT_EQ(g.neighbors(0b11), (std::vector<Word>{0b01, 0b10}));
  EXPECT_EQ(g.neighbors(0b10), (std::vector<Word>{0b00, 0b11}));
}

TEST(Cayley, CompleteGraphOnFourVertices) {
  const auto g = build_cayley_xor_graph(2, {0b01, 0b10, 0b11}).to_undirected();
  // XOR oracle: every unordered pair {x, y} with x != y differs by a nonzero word.
  std::set<std::pair<Vertex, Vertex>> edges;
  for (Vertex x = 0; x < 4; ++x)
    for (Vertex y : g.neighbors(x)) edges.insert({std::min(x, y), std::max(x, y)});
  EXPECT_EQ(edges.size(), 6u);
  EXPECT_EQ(g.edge_count(), 6u);
}

TEST(Cayley, SingleGeneratorIsPerfectMatching) {
  const auto g = build_cayley_xor_graph(3, {0b001}).to_undirected();
  EXPECT_EQ(g.edge_count(), 4u);
  for (Vertex x = 0; x < 8; ++x) {
    ASSERT_EQ(g.neighbors(x).size(), 1u);
    EXPECT_EQ(g.neighbors(x)[0], x ^ 1u);
  }
}

TEST(Cayley, RejectsBadGenerators) {
  EXPECT_THROW(build_cayley_xor_graph(3, {1, 1}), InvalidParameter);
  EXPECT_THROW(build_cayley_xor_graph(3, {0, 1}), InvalidParameter);
  EXPECT_THROW(build_cayley_xor_graph(3, {8}), InvalidParameter);
  EXPECT_THROW(build_cayley_xor_graph(3, {}), InvalidParameter);
}

TEST(Cayley, SymmetryAndRegularity) {
  const auto h = sample_generators(8, ExpanderBudget::with_count(20), 4);
  const auto g = build_cayley_xor_graph(8, h);
  for (Word x = 0; x < 256; ++x) {
    EXPECT_EQ(g.neighbors(x).size(), h.size());
    for (Word gen : h) {
      const auto back = g.neighbors(x ^ gen);
      EXPECT_TRUE(std::binary_search(back.begin(), back.end(), x));
    }
  }
}

TEST(DoubleCover, CompleteGraph) {
  const auto b = bipartite_double_cover(UndirectedGraph::complete(4));
  EXPECT_EQ(b.degree(), 3u);
  for (Vertex u = 0; u < 4; ++u) {
    std::vector<Vertex> expected;
    for (Vertex v = 0; v < 4; ++v)
      if (v != u) expected.push_back(v);
    auto nb = b.neighbors(u);
    EXPECT_EQ(std::vector<Vertex>(nb.begin(), nb.end()), expected);
  }
}

TEST(DoubleCover, FourCycle) {
  const auto b = bipartite_double_cover(UndirectedGraph::cycle(4));
  for (Vertex i = 0; i < 4; ++i) {
    std::vector<Vertex> expected{(i + 1) % 4, (i + 3) % 4};
    std::sort(expected.begin(), expected.end());
    auto nb = b.neighbors(i);
    EXPECT_EQ(std::vector<Vertex>(nb.begin(), nb.end()), expected);
  }
}

TEST(DoubleCover, CayleyDegreeAudit) {
  const auto g = build_cayley_xor_graph(8, sample_generators(8, ExpanderBudget::with_count(20), 8));
  const auto b = bipartite_double_cover(g);
  EXPECT_EQ(b.construction(), Construction::cayley_double_cover);
  audit_degrees(b, 20, 20);
  EXPECT_EQ(b.edge_count(), 20u * 256u);
  EXPECT_FALSE(b.has_parallel_edges());
}

TEST(DoubleCover, RejectsIrregular) {
  const std::vector<std::pair<Vertex, Vertex>> edges{{0, 1}, {1, 2}};
  EXPECT_THROW(bipartite_double_cover(UndirectedGraph::from_edges(3, edges)), InvalidParameter);
}

TEST(UndirectedGraph, RejectsAsymmetricRows) {
  EXPECT_THROW(UndirectedGraph(2, {{1}, {}}), InvalidParameter);
  EXPECT_THROW(UndirectedGraph(2, {{1, 1}, {0}}), InvalidParameter);
  EXPECT_NO_THROW(UndirectedGraph(2, {{1, 1}, {0, 0}}));
}

TEST(LayeredNetwork, ChainingAndSeeds) {
  const auto net = random_layered_network(16, 3, 4, 10);
  EXPECT_EQ(net.depth(), 4u);
  EXPECT_TRUE(net.uniform_width());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(net.layer(i), build_random_regular_bipartite(16, 3, 10 + i));
  EXPECT_THROW(LayeredNetwork({complete_bipartite(2, 3), complete_bipartite(2, 2)}), InvalidParameter);
  EXPECT_THROW(LayeredNetwork(std::vector<BipartiteGraph>{}), InvalidParameter);
}
