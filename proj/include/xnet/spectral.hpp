#pragma once

// Spectral gap estimation and the two expander lemmas (vertex expansion and
// edge mixing), checked against concrete graphs.
//
// Conventions: lambda2 is the second-largest eigenvalue *magnitude* of a
// D-regular adjacency operator, i.e. bipartite -D components count. For a
// bipartite layer the operator is the biadjacency matrix and lambda2 is its
// second singular value. gamma = 1 - lambda2 / D.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xnet/error.hpp"
#include "xnet/graph.hpp"
#include "xnet/parallel.hpp"
#include "xnet/random.hpp"

namespace xnet {

enum class SpectralMethod { character_sum, power_iteration, dense_eigensolve };

inline const char* to_string(SpectralMethod m) {
  switch (m) {
    case SpectralMethod::character_sum: return "character-sum";
    case SpectralMethod::power_iteration: return "power-iteration";
    case SpectralMethod::dense_eigensolve: return "dense-eigensolve";
  }
  return "unknown";
}

struct SpectralReport {
  double degree = 0;  // top eigenvalue / singular value
  double lambda2 = 0;
  double gamma = 0;
  SpectralMethod method = SpectralMethod::power_iteration;
  std::size_t iterations = 0;
  double residual = 0;
};

struct PowerIterationOptions {
  double tol = 1e-8;
  std::optional<std::size_t> max_iter;  // default max(100, ceil(10 n ln n))
  std::uint64_t seed = 0;
};

inline constexpr unsigned kMaxExactCayleyDimension = 22;
inline constexpr std::size_t kPowerBlockSize = 4;

namespace detail {

inline SpectralReport make_report(double degree, double lambda2, SpectralMethod method,
                                  std::size_t iterations = 0, double residual = 0) {
  lambda2 = std::clamp(lambda2, 0.0, degree);
  return SpectralReport{degree, lambda2, 1.0 - lambda2 / degree, method, iterations, residual};
}

inline std::size_t default_max_iter(std::size_t n) {
  const double nn = static_cast<double>(std::max<std::size_t>(n, 2));
  return std::max<std::size_t>(100, static_cast<std::size_t>(std::ceil(10.0 * nn * std::log(nn))));
}

inline void remove_mean(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

inline double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// Block power iteration on a PSD operator restricted to the complement of
// the all-ones vector, with Rayleigh-Ritz on a small block so the top Ritz
// vector converges at rate lambda_{b+2}/lambda_2. Returns sqrt of the top
// eigenvalue.
inline SpectralReport power_iterate_psd(
    std::size_t n, double top, const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
    const PowerIterationOptions& opt) {
  detail::require(opt.tol > 0.0, "tolerance must be positive");
  const std::size_t max_iter = opt.max_iter.value_or(default_max_iter(n));
  if (n == 1) return make_report(top, 0.0, SpectralMethod::power_iteration);

  const auto rows = static_cast<Eigen::Index>(n);
  const auto block = static_cast<Eigen::Index>(std::min<std::size_t>(kPowerBlockSize, n - 1));
  Rng rng(opt.seed);
  Eigen::MatrixXd v(rows, block), w(rows, block);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index i = 0; i < rows; ++i) v(i, c) = rng.normal();
  // QR of [ones, m] keeps every returned column orthogonal to ones, even if m is rank deficient.
  Eigen::MatrixXd stacked(rows, block + 1);
  stacked.col(0).setConstant(1.0 / std::sqrt(double(n)));
  auto orthonormalize = [&](Eigen::MatrixXd& m) {
    stacked.rightCols(block) = m;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
    m = (qr.householderQ() * Eigen::MatrixXd::Identity(rows, block + 1)).rightCols(block);
  };
  orthonormalize(v);

  std::vector<double> in(n), out(n);
  const double zero_floor = 1e-13 * top * top;
  double best_sigma = 0.0, best_residual = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    for (Eigen::Index c = 0; c < block; ++c) {
      Eigen::Map<Eigen::VectorXd>(in.data(), rows) = v.col(c);
      apply(in, out);
      w.col(c) = Eigen::Map<const Eigen::VectorXd>(out.data(), rows);
    }
    w.rowwise() -= w.colwise().mean();
    const Eigen::MatrixXd h = v.transpose() * w;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
    const double mu = es.eigenvalues()(block - 1);
    const Eigen::VectorXd y = es.eigenvectors().col(block - 1);
    const double r = (w * y - mu * (v * y)).norm();
    best_sigma = std::sqrt(std::max(mu, 0.0));
    best_residual = r;
    if (w.norm() <= zero_floor) {
      // Operator vanishes on the ones-complement.
      return make_report(top, 0.0, SpectralMethod::power_iteration, it, w.norm());
    }
    // Some eigenvalue of the operator lies in [mu - r, mu + r]; translate to sigma.
    const double sigma_err = std::sqrt(std::max(mu + r, 0.0)) - std::sqrt(std::max(mu - r, 0.0));
    if (sigma_err <= opt.tol) {
      return make_report(top, best_sigma, SpectralMethod::power_iteration, it, sigma_err);
    }
    v = w;
    orthonormalize(v);
  }
  throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         best_sigma, best_residual);
}

}  // namespace detail

/// Full spectrum of an XOR Cayley graph, sorted descending. The eigenvalue
/// for character y is sum_{h in H} (-1)^{popcount(y & h)}; all of them are
/// obtained at once with a fast Walsh-Hadamard transform of the indicator of H.
inline std::vector<double> exact_cayley_spectrum(const CayleyGraph& g) {
  if (g.dimension() > kMaxExactCayleyDimension) {
    throw ResourceError("exact spectrum limited to k <= " + std::to_string(kMaxExactCayleyDimension));
  }
  const auto n = static_cast<std::size_t>(g.vertex_count());
  std::vector<std::int64_t> f(n, 0);
  for (Word h : g.generators()) f[static_cast<std::size_t>(h)] = 1;
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const auto a = f[j], b = f[j + len];
        f[j] = a + b;
        f[j + len] = a - b;
      }
    }
  }
  std::vector<double> eig(f.begin(), f.end());
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

/// lambda2 and gamma from the exact spectrum: one copy of the top
/// eigenvalue |H| is removed, lambda2 is the largest remaining magnitude.
inline SpectralReport cayley_spectral_report(const CayleyGraph& g) {
  const auto eig = exact_cayley_spectrum(g);
  const double top = static_cast<double>(g.degree());
  const double lambda2 = eig.size() < 2 ? 0.0 : std::max(std::abs(eig[1]), std::abs(eig.back()));
  return detail::make_report(top, lambda2, SpectralMethod::character_sum);
}

/// Second singular value of a biregular bipartite layer by power iteration
/// on A^T A with the all-ones left vector projected out.
inline SpectralReport estimate_second_eigenvalue(const BipartiteGraph& g,
                                                 const PowerIterationOptions& opt = {}) {
  const auto right_degree = g.right_regular_degree();
  detail::require(right_degree.has_value(), "spectral estimate requires a biregular graph");
  const double top = std::sqrt(double(g.degree()) * double(*right_degree));
  std::vector<double> mid(g.n_right());
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(mid.begin(), mid.end(), 0.0);
    for (std::size_t u = 0; u < g.n_left(); ++u)
      for (Vertex v : g.neighbors(u)) mid[v] += x[u];
    for (std::size_t u = 0; u < g.n_left(); ++u) {
      double s = 0.0;
      for (Vertex v : g.neighbors(u)) s += mid[v];
      out[u] = s;
    }
  };
  return detail::power_iterate_psd(g.n_left(), top, apply, opt);
}

/// Second-largest eigenvalue magnitude of a regular undirected graph by
/// power iteration on A^2 with the all-ones vector projected out.
inline SpectralReport estimate_second_eigenvalue(const UndirectedGraph& g,
                                                 const PowerIterationOptions& opt = {}) {
  const auto d = g.regular_degree();
  detail::require(d.has_value() && *d > 0, "spectral estimate requires a regular graph");
  std::vector<double> mid(g.vertex_count());
  auto adj = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t u = 0; u < g.vertex_count(); ++u) {
      double s = 0.0;
      for (Vertex v : g.neighbors(u)) s += x[v];
      out[u] = s;
    }
  };
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    adj(x, mid);
    adj(mid, out);
  };
  return detail::power_iterate_psd(g.vertex_count(), static_cast<double>(*d), apply, opt);
}

inline constexpr std::size_t kMaxDenseEigensolve = 2048;

/// Dense reference: singular values of the biadjacency matrix.
inline SpectralReport dense_second_eigenvalue(const BipartiteGraph& g) {
  if (g.n_left() > kMaxDenseEigensolve || g.n_right() > kMaxDenseEigensolve) {
    throw ResourceError("dense eigensolve limited to n <= " + std::to_string(kMaxDenseEigensolve));
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.n_right()),
                                            static_cast<Eigen::Index>(g.n_left()));
  for (std::size_t u = 0; u < g.n_left(); ++u)
    for (Vertex v : g.neighbors(u)) a(v, static_cast<Eigen::Index>(u)) += 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double lambda2 = s.size() > 1 ? s(1) : 0.0;
  return detail::make_report(s(0), lambda2, SpectralMethod::dense_eigensolve);
}

inline SpectralReport dense_second_eigenvalue(const UndirectedGraph& g) {
  const std::size_t n = g.vertex_count();
  if (n > kMaxDenseEigensolve) {
    throw ResourceError("dense eigensolve limited to n <= " + std::to_string(kMaxDenseEigensolve));
  }
  const auto d = g.regular_degree();
  detail::require(d.has_value() && *d > 0, "dense eigensolve requires a regular graph");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t u = 0; u < n; ++u)
    for (Vertex v : g.neighbors(u)) a(static_cast<Eigen::Index>(u), v) += 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mags.push_back(es.eigenvalues()(i));
  // Drop the eigenvalue closest to +D (the all-ones direction), keep magnitudes.
  auto top = std::max_element(mags.begin(), mags.end());
  mags.erase(top);
  double lambda2 = 0.0;
  for (double m : mags) lambda2 = std::max(lambda2, std::abs(m));
  return detail::make_report(static_cast<double>(*d), lambda2, SpectralMethod::dense_eigensolve);
}

// ---------------------------------------------------------------------------
// Expander mixing

struct MixingCheckReport {
  std::size_t s_size = 0;
  std::size_t t_size = 0;
  std::uint64_t observed_edges = 0;
  double expected = 0;
  double deviation = 0;       // |observed - expected|
  double bound_paper = 0;     // (1 - gamma) sqrt(|S||T|)
  double bound_standard = 0;  // lambda2 sqrt(|S||T|)
  bool pass_paper = false;
  bool pass_standard = false;
};

namespace detail {

inline bool within(double deviation, double bound) {
  return deviation <= bound + 1e-9 * std::max(1.0, bound);
}

inline MixingCheckReport mixing_from_count(std::uint64_t observed, std::size_t s, std::size_t t,
                                           std::size_t n_right, const SpectralReport& spec) {
  MixingCheckReport r;
  r.s_size = s;
  r.t_size = t;
  r.observed_edges = observed;
  r.expected = spec.degree * double(s) * double(t) / double(n_right);
  r.deviation = std::abs(double(observed) - r.expected);
  const double root = std::sqrt(double(s) * double(t));
  r.bound_paper = (1.0 - spec.gamma) * root;
  r.bound_standard = spec.lambda2 * root;
  r.pass_paper = within(r.deviation, r.bound_paper);
  r.pass_standard = within(r.deviation, r.bound_standard);
  return r;
}

inline std::vector<char> membership(std::span<const Vertex> set, std::size_t n, const char* side) {
  std::vector<char> in(n, 0);
  for (Vertex v : set) {
    detail::require(v < n, std::string(side) + " vertex index out of range");
    detail::require(!in[v], std::string(side) + " contains a repeated vertex");
    in[v] = 1;
  }
  return in;
}

}  // namespace detail

/// E(S,T) counted edge by edge (parallel edges counted with multiplicity)
/// for S on the left and T on the right, against both mixing bounds.
/// `spec` supplies lambda2 and gamma; its degree must be the graph's
/// top singular value.
inline MixingCheckReport check_mixing(const BipartiteGraph& g, std::span<const Vertex> s,
                                      std::span<const Vertex> t, const SpectralReport& spec) {
  detail::membership(s, g.n_left(), "S");
  const auto in_t = detail::membership(t, g.n_right(), "T");
  std::uint64_t observed = 0;
  for (Vertex u : s)
    for (Vertex v : g.neighbors(u)) observed += static_cast<std::uint64_t>(in_t[v]);
  return detail::mixing_from_count(observed, s.size(), t.size(), g.n_right(), spec);
}

struct MixingSweepSummary {
  std::size_t pairs = 0;
  std::size_t standard_violations = 0;
  std::size_t paper_violations = 0;
  double worst_standard_ratio = 0;  // max deviation / bound_standard
  double paper_pass_rate() const { return pairs ? 1.0 - double(paper_violations) / double(pairs) : 1.0; }
};

inline constexpr std::size_t kMaxExhaustiveMixing = 12;

/// Every pair of nonempty S (left) and T (right). n_left, n_right <= 12.
inline MixingSweepSummary check_mixing_exhaustive(const BipartiteGraph& g, const SpectralReport& spec,
                                                  std::size_t threads = 1) {
  if (g.n_left() > kMaxExhaustiveMixing || g.n_right() > kMaxExhaustiveMixing) {
    throw ResourceError("exhaustive mixing limited to n <= " + std::to_string(kMaxExhaustiveMixing));
  }
  const std::size_t s_count = (std::size_t{1} << g.n_left()) - 1;
  const std::size_t t_count = (std::size_t{1} << g.n_right()) - 1;
  std::vector<MixingSweepSummary> partial(s_count);
  parallel_for(s_count, threads, [&](std::size_t i) {
    const std::uint32_t smask = static_cast<std::uint32_t>(i + 1);
    // Right-vertex multiplicities reached from S.
    std::vector<std::uint32_t> hits(g.n_right(), 0);
    for (std::size_t u = 0; u < g.n_left(); ++u)
      if (smask >> u & 1u)
        for (Vertex v : g.neighbors(u)) ++hits[v];
    auto& acc = partial[i];
    for (std::uint32_t tmask = 1; tmask <= t_count; ++tmask) {
      std::uint64_t observed = 0;
      for (std::size_t v = 0; v < g.n_right(); ++v)
        if (tmask >> v & 1u) observed += hits[v];
      const auto r = detail::mixing_from_count(observed, std::popcount(smask), std::popcount(tmask),
                                               g.n_right(), spec);
      ++acc.pairs;
      acc.standard_violations += !r.pass_standard;
      acc.paper_violations += !r.pass_paper;
      if (r.bound_standard > 0) {
        acc.worst_standard_ratio = std::max(acc.worst_standard_ratio, r.deviation / r.bound_standard);
      } else if (r.deviation > 0) {
        acc.worst_standard_ratio = INFINITY;
      }
    }
  });
  MixingSweepSummary total;
  for (const auto& p : partial) {
    total.pairs += p.pairs;
    total.standard_violations += p.standard_violations;
    total.paper_violations += p.paper_violations;
    total.worst_standard_ratio = std::max(total.worst_standard_ratio, p.worst_standard_ratio);
  }
  return total;
}

/// Random subset of [0, n) with `size` elements, sorted.
inline std::vector<Vertex> random_subset(std::size_t n, std::size_t size, Rng& rng) {
  detail::require(size <= n, "subset larger than ground set");
  std::vector<Vertex> all(n);
  std::iota(all.begin(), all.end(), Vertex{0});
  for (std::size_t i = 0; i < size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(size);
  std::sort(all.begin(), all.end());
  return all;
}

// ---------------------------------------------------------------------------
// Vertex expansion

enum class ExpansionMode { exhaustive, sampled };

inline const char* to_string(ExpansionMode m) {
  return m == ExpansionMode::exhaustive ? "exhaustive" : "sampled";
}

struct ExpansionCheckReport {
  std::vector<Vertex> subset;
  std::size_t subset_size = 0;
  std::size_t neighborhood_size = 0;
  double claimed_lower_bound = 0;  // (1 + gamma) |S|
  bool satisfied = false;
  ExpansionMode mode = ExpansionMode::exhaustive;
};

inline constexpr std::size_t kMaxExhaustiveExpansion = 20;

/// |N(S)| by exact set union over the neighbour lists.
inline std::size_t neighborhood_size(const BipartiteGraph& g, std::span<const Vertex> subset) {
  std::vector<char> seen(g.n_right(), 0);
  std::size_t count = 0;
  for (Vertex u : subset) {
    for (Vertex v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
      }
    }
  }
  return count;
}

struct ExpansionOptions {
  ExpansionMode mode = ExpansionMode::sampled;
  std::size_t sample_count = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Subsets S of the left side with 1 <= |S| <= n_left/2 against the
/// inequality |N(S)| >= (1 + gamma)|S|. `satisfied` is recorded, not enforced.
/// Exhaustive reports are ordered by the subset's bitmask value; sampled
/// reports follow the sample stream.
inline std::vector<ExpansionCheckReport> check_expansion(const BipartiteGraph& g, double gamma,
                                                         const ExpansionOptions& opt = {}) {
  const std::size_t n = g.n_left();
  const std::size_t half = n / 2;
  auto make = [&](std::vector<Vertex> subset) {
    ExpansionCheckReport r;
    r.subset_size = subset.size();
    r.neighborhood_size = neighborhood_size(g, subset);
    r.claimed_lower_bound = (1.0 + gamma) * double(subset.size());
    r.satisfied = double(r.neighborhood_size) + 1e-9 >= r.claimed_lower_bound;
    r.mode = opt.mode;
    r.subset = std::move(subset);
    return r;
  };

  std::vector<ExpansionCheckReport> out;
  if (opt.mode == ExpansionMode::exhaustive) {
    if (n > kMaxExhaustiveExpansion) {
      throw ResourceError("exhaustive expansion check limited to n <= " +
                          std::to_string(kMaxExhaustiveExpansion));
    }
    if (half == 0) return out;
    const std::size_t total = (std::size_t{1} << n) - 1;
    const std::size_t chunks = std::max<std::size_t>(opt.threads, 1) * 4;
    std::vector<std::vector<ExpansionCheckReport>> parts(chunks);
    parallel_for(chunks, opt.threads, [&](std::size_t c) {
      const std::size_t begin = 1 + c * total / chunks;
      const std::size_t end = 1 + (c + 1) * total / chunks;
      for (std::size_t mask = begin; mask < end; ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) > half) continue;
        std::vector<Vertex> subset;
        for (std::size_t u = 0; u < n; ++u)
          if (mask >> u & 1u) subset.push_back(static_cast<Vertex>(u));
        parts[c].push_back(make(std::move(subset)));
      }
    });
    for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
    return out;
  }

  if (half == 0) return out;
  Rng rng(opt.seed);
  std::vector<std::vector<Vertex>> subsets;
  subsets.reserve(opt.sample_count);
  for (std::size_t i = 0; i < opt.sample_count; ++i) {
    const std::size_t size = 1 + static_cast<std::size_t>(rng.uniform_below(half));
    subsets.push_back(random_subset(n, size, rng));
  }
  out.resize(subsets.size());
  parallel_for(subsets.size(), opt.threads, [&](std::size_t i) { out[i] = make(std::move(subsets[i])); });
  return out;
}

}  // namespace xnet
