#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "xnet/spectral.hpp"

using namespace xnet;

namespace {

// Character sums evaluated one character at a time, no transform.
std::vector<double> naive_character_sums(unsigned k, const std::vector<Word>& h) {
  std::vector<double> eig;
  for (Word y = 0; y < (Word{1} << k); ++y) {
    int s = 0;
    for (Word g : h) s += (std::popcount(y & g) % 2 == 0) ? 1 : -1;
    eig.push_back(s);
  }
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

// Brute-force neighbourhood by 64-bit masks.
std::size_t bitset_neighborhood(const BipartiteGraph& g, std::uint32_t subset_mask) {
  std::uint64_t reached = 0;
  for (std::size_t u = 0; u < g.n_left(); ++u)
    if (subset_mask >> u & 1u)
      for (Vertex v : g.neighbors(u)) reached |= std::uint64_t{1} << v;
  return static_cast<std::size_t>(std::popcount(reached));
}

}  // namespace

TEST(ExactSpectrum, FourCycle) {
  EXPECT_EQ(exact_cayley_spectrum(build_cayley_xor_graph(2, {1, 2})), (std::vector<double>{2, 0, 0, -2}));
}

TEST(ExactSpectrum, CompleteGraph) {
  EXPECT_EQ(exact_cayley_spectrum(build_cayley_xor_graph(2, {1, 2, 3})), (std::vector<double>{3, -1, -1, -1}));
}

TEST(ExactSpectrum, AgreesWithNaiveCharacterSums) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = sample_generators(7, ExpanderBudget::with_count(5 + seed), seed);
    const auto spec = exact_cayley_spectrum(build_cayley_xor_graph(7, h));
    EXPECT_EQ(spec, naive_character_sums(7, h));
    EXPECT_EQ(spec.front(), double(h.size()));
  }
}

TEST(ExactSpectrum, ResourceLimit) {
  EXPECT_THROW(exact_cayley_spectrum(build_cayley_xor_graph(30, {1, 2, 4})), ResourceError);
}

TEST(CayleyReport, BipartiteComponentGivesZeroGap) {
  const auto r = cayley_spectral_report(build_cayley_xor_graph(2, {1, 2}));
  EXPECT_DOUBLE_EQ(r.lambda2, 2.0);
  EXPECT_DOUBLE_EQ(r.gamma, 0.0);
  EXPECT_EQ(r.method, SpectralMethod::character_sum);
}

TEST(PowerIteration, CompleteGraphK4) {
  const auto r = estimate_second_eigenvalue(UndirectedGraph::complete(4));
  EXPECT_NEAR(r.lambda2, 1.0, 1e-8);
  EXPECT_NEAR(r.gamma, 2.0 / 3.0, 1e-8);
  const auto dense = dense_second_eigenvalue(UndirectedGraph::complete(4));
  EXPECT_NEAR(dense.lambda2, 1.0, 1e-12);
}

TEST(PowerIteration, IdentityMatching) {
  const auto r = estimate_second_eigenvalue(identity_matching(10));
  EXPECT_NEAR(r.lambda2, 1.0, 1e-12);
  EXPECT_NEAR(r.gamma, 0.0, 1e-12);
}

TEST(PowerIteration, CompleteBipartiteHasFullGap) {
  const auto r = estimate_second_eigenvalue(complete_bipartite(6, 6));
  EXPECT_DOUBLE_EQ(r.degree, 6.0);
  EXPECT_DOUBLE_EQ(r.lambda2, 0.0);
  EXPECT_DOUBLE_EQ(r.gamma, 1.0);
}

TEST(PowerIteration, CayleyMatchesCharacterSums) {
  const auto g = build_cayley_xor_graph(8, sample_generators(8, ExpanderBudget::with_count(32), 5));
  const auto exact = cayley_spectral_report(g);
  const auto undirected = estimate_second_eigenvalue(g.to_undirected());
  const auto cover = estimate_second_eigenvalue(bipartite_double_cover(g));
  EXPECT_NEAR(undirected.lambda2, exact.lambda2, 1e-6);
  EXPECT_NEAR(cover.lambda2, exact.lambda2, 1e-6);
  EXPECT_LE(undirected.residual, 1e-8);
}

TEST(PowerIteration, MatchesDenseOracleOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = build_random_regular_bipartite(40, 3 + seed % 4, seed);
    const auto est = estimate_second_eigenvalue(g);
    const auto dense = dense_second_eigenvalue(g);
    EXPECT_NEAR(est.lambda2, dense.lambda2, 1e-6) << "seed " << seed;
    EXPECT_NEAR(est.degree, dense.degree, 1e-9);
    EXPECT_GE(est.gamma, 0.0);
    EXPECT_LE(est.gamma, 1.0);
  }
}

TEST(PowerIteration, Deterministic) {
  const auto g = build_random_regular_bipartite(128, 4, 3);
  const auto a = estimate_second_eigenvalue(g, {1e-8, std::nullopt, 9});
  const auto b = estimate_second_eigenvalue(g, {1e-8, std::nullopt, 9});
  EXPECT_EQ(a.lambda2, b.lambda2);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(PowerIteration, ConvergenceErrorCarriesEstimate) {
  const auto g = build_random_regular_bipartite(200, 3, 1);
  try {
    estimate_second_eigenvalue(g, {1e-14, 3, 0});
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_estimate(), 0.0);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(PowerIteration, RejectsIrregularAndBadTolerance) {
  const std::vector<std::pair<Vertex, Vertex>> path{{0, 1}, {1, 2}};
  EXPECT_THROW(estimate_second_eigenvalue(UndirectedGraph::from_edges(3, path)), InvalidParameter);
  EXPECT_THROW(estimate_second_eigenvalue(complete_bipartite(2, 2), {0.0, std::nullopt, 0}), InvalidParameter);
}

TEST(Mixing, CompleteBipartiteIsExact) {
  const auto g = complete_bipartite(6, 6);
  const auto spec = estimate_second_eigenvalue(g);
  const std::vector<Vertex> s{0, 2, 5}, t{1, 3};
  const auto r = check_mixing(g, s, t, spec);
  EXPECT_EQ(r.observed_edges, 6u);
  EXPECT_DOUBLE_EQ(r.expected, 6.0);
  EXPECT_DOUBLE_EQ(r.deviation, 0.0);
  EXPECT_TRUE(r.pass_standard);
  EXPECT_TRUE(r.pass_paper);
}

TEST(Mixing, ExhaustiveStandardBoundOnSmallGraph) {
  const auto g = build_random_regular_bipartite(8, 3, 11);
  const auto spec = dense_second_eigenvalue(g);
  const auto summary = check_mixing_exhaustive(g, spec);
  EXPECT_EQ(summary.pairs, 255u * 255u);
  EXPECT_EQ(summary.standard_violations, 0u);
  EXPECT_LE(summary.worst_standard_ratio, 1.0 + 1e-9);
}

TEST(Mixing, SingleMatching) {
  const auto g = identity_matching(8);
  const auto spec = estimate_second_eigenvalue(g);
  const std::vector<Vertex> t{1, 4, 6};
  const auto r = check_mixing(g, t, t, spec);  // S is the left support of T's matches
  EXPECT_EQ(r.observed_edges, 3u);
  EXPECT_DOUBLE_EQ(r.expected, 9.0 / 8.0);
  EXPECT_DOUBLE_EQ(r.bound_standard, 3.0);
  EXPECT_TRUE(r.pass_standard);
}

TEST(Mixing, ParallelSweepMatchesSerial) {
  const auto g = build_random_regular_bipartite(9, 4, 2);
  const auto spec = dense_second_eigenvalue(g);
  const auto a = check_mixing_exhaustive(g, spec, 1);
  const auto b = check_mixing_exhaustive(g, spec, 3);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.paper_violations, b.paper_violations);
  EXPECT_EQ(a.worst_standard_ratio, b.worst_standard_ratio);
}

TEST(Mixing, RejectsBadSubsets) {
  const auto g = complete_bipartite(3, 3);
  const auto spec = estimate_second_eigenvalue(g);
  const std::vector<Vertex> ok{0}, out_of_range{3}, repeated{1, 1};
  EXPECT_THROW(check_mixing(g, out_of_range, ok, spec), InvalidParameter);
  EXPECT_THROW(check_mixing(g, ok, repeated, spec), InvalidParameter);
  EXPECT_THROW(check_mixing_exhaustive(complete_bipartite(13, 13), spec), ResourceError);
}

TEST(Expansion, CompleteBipartite) {
  const auto g = complete_bipartite(6, 6);
  const auto reports = check_expansion(g, 1.0, {ExpansionMode::exhaustive});
  EXPECT_EQ(reports.size(), 6u + 15u + 20u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.neighborhood_size, 6u);
    EXPECT_TRUE(r.satisfied);
  }
}

TEST(Expansion, IdentityMatchingBoundaryEquality) {
  const auto g = identity_matching(8);
  for (const auto& r : check_expansion(g, 0.0, {ExpansionMode::exhaustive})) {
    EXPECT_EQ(r.neighborhood_size, r.subset_size);
    EXPECT_DOUBLE_EQ(r.claimed_lower_bound, double(r.subset_size));
    EXPECT_TRUE(r.satisfied);
  }
}

TEST(Expansion, ExhaustiveMatchesBitsetBruteForce) {
  const auto g = build_random_regular_bipartite(12, 3, 2);
  const auto gamma = dense_second_eigenvalue(g).gamma;
  const auto reports = check_expansion(g, gamma, {ExpansionMode::exhaustive, 0, 0, 2});
  std::size_t index = 0;
  for (std::uint32_t mask = 1; mask < (1u << 12); ++mask) {
    if (std::popcount(mask) > 6) continue;
    ASSERT_LT(index, reports.size());
    const auto& r = reports[index++];
    std::uint32_t from_report = 0;
    for (Vertex u : r.subset) from_report |= 1u << u;
    ASSERT_EQ(from_report, mask);
    EXPECT_EQ(r.neighborhood_size, bitset_neighborhood(g, mask));
  }
  EXPECT_EQ(index, reports.size());
}

TEST(Expansion, SampledIsDeterministicAndBounded) {
  const auto g = build_random_regular_bipartite(100, 4, 6);
  const ExpansionOptions opt{ExpansionMode::sampled, 200, 8, 1};
  const auto a = check_expansion(g, 0.3, opt);
  auto threaded = opt;
  threaded.threads = 4;
  const auto b = check_expansion(g, 0.3, threaded);
  ASSERT_EQ(a.size(), 200u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].subset, b[i].subset);
    EXPECT_EQ(a[i].neighborhood_size, b[i].neighborhood_size);
    EXPECT_GE(a[i].subset_size, 1u);
    EXPECT_LE(a[i].subset_size, 50u);
    EXPECT_EQ(a[i].neighborhood_size, neighborhood_size(g, a[i].subset));
  }
}

TEST(Expansion, ExhaustiveLimit) {
  EXPECT_THROW(check_expansion(build_random_regular_bipartite(21, 2, 0), 0.1, {ExpansionMode::exhaustive}),
               ResourceError);
}
