#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xnet/xnet.hpp"

using namespace xnet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void criterion(int id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    o.pass = false;
    o.detail += "; over time limit " + fmt("%.0f s", time_limit_s);
  }
  failures += !o.pass;
  std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::vector<Vertex> random_subset_of(std::size_t n, std::size_t size, Rng& rng) { return random_subset(n, size, rng); }

// Paths from u through layers [layer, depth) ending in T, one edge at a time.
std::uint64_t dfs_paths(const LayeredNetwork& net, std::size_t layer, Vertex u, const std::vector<char>& in_t) {
  if (layer == net.depth()) return in_t[u] ? 1 : 0;
  std::uint64_t total = 0;
  for (Vertex v : net.layer(layer).neighbors(u)) total += dfs_paths(net, layer + 1, v, in_t);
  return total;
}

double relative_gap(double a, double n) {
  const double scale = std::max(std::abs(a), std::abs(n));
  return scale <= 1e-8 ? 0.0 : std::abs(a - n) / scale;
}

}  // namespace

int main() {
  criterion(1, "Cayley spectral-gap budget", 10.0, [] {
    Outcome o{true, ""};
    for (unsigned k : {8u, 10u}) {
      for (double eps : {0.5, 0.3}) {
        const auto budget = ExpanderBudget::for_dimension(k, eps);
        int good = 0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
          const auto g = build_cayley_xor_graph(k, sample_generators(k, budget, seed));
          good += cayley_spectral_report(g).gamma >= 1.0 - eps;
        }
        o.pass &= good >= 9;
        o.detail += "k=" + std::to_string(k) + " eps=" + fmt("%.1f", eps) + " |H|=" +
                    std::to_string(budget.generator_count) + ": " + std::to_string(good) + "/10; ";
      }
    }
    o.detail += "c=" + fmt("%.2f", ExpanderBudget::kDefaultConstant);
    return o;
  });

  criterion(2, "Spectral oracle agreement", 0, [] {
    Rng rng(2024);
    double worst_cayley = 0.0;
    for (int i = 0; i < 50; ++i) {
      const unsigned k = 4 + static_cast<unsigned>(rng.uniform_below(7));
      const std::size_t count = std::min<std::size_t>((std::size_t{1} << k) - 1, k + 1 + rng.uniform_below(3 * k));
      const auto g = build_cayley_xor_graph(k, sample_generators(k, ExpanderBudget::with_count(count), 100 + i));
      const auto exact = cayley_spectral_report(g);
      const auto est = estimate_second_eigenvalue(g.to_undirected(), {1e-8, std::nullopt, std::uint64_t(i)});
      worst_cayley = std::max(worst_cayley, std::abs(est.lambda2 - exact.lambda2));
    }
    double worst_dense = 0.0;
    std::size_t graphs = 0;
    auto compare = [&](const auto& g) {
      const auto est = estimate_second_eigenvalue(g);
      const auto dense = dense_second_eigenvalue(g);
      worst_dense = std::max(worst_dense, std::abs(est.lambda2 - dense.lambda2));
      ++graphs;
    };
    for (std::size_t n = 2; n <= 64; ++n) {
      for (std::size_t d : {1u, 2u, 3u, 4u, 6u, 8u}) {
        if (d > n) continue;
        compare(build_random_regular_bipartite(n, d, n * 100 + d));
        if (d < n) compare(build_random_regular_bipartite(n, d, n * 100 + d, EdgeMode::dedup));
      }
      compare(UndirectedGraph::complete(n));
      if (n >= 3) compare(UndirectedGraph::cycle(n));
    }
    for (unsigned k = 2; k <= 6; ++k)
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const std::size_t count = std::min<std::size_t>((std::size_t{1} << k) - 1, k + 1 + seed);
        compare(build_cayley_xor_graph(k, sample_generators(k, ExpanderBudget::with_count(count), seed)).to_undirected());
      }
    return Outcome{worst_cayley <= 1e-6 && worst_dense <= 1e-6,
                   "50 Cayley graphs max |diff| " + fmt("%.2e", worst_cayley) + "; " + std::to_string(graphs) +
                       " regular graphs n<=64 max |diff| " + fmt("%.2e", worst_dense)};
  });

  criterion(3, "Mixing lemma, standard form", 0, [] {
    std::size_t violations = 0, pairs = 0, paper_violations = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto g = build_random_regular_bipartite(8, 3, seed, EdgeMode::dedup);
      const auto spec = estimate_second_eigenvalue(g);
      const auto s = check_mixing_exhaustive(g, spec);
      violations += s.standard_violations;
      paper_violations += s.paper_violations;
      pairs += s.pairs;
      worst = std::max(worst, s.worst_standard_ratio);
    }
    return Outcome{violations == 0, std::to_string(violations) + " violations over " + std::to_string(pairs) +
                                         " (S,T) pairs, worst deviation/bound " + fmt("%.4f", worst) +
                                         "; paper (1-gamma) bound pass rate " +
                                         fmt("%.4f", 1.0 - double(paper_violations) / double(pairs)) + " (reported)"};
  });

  criterion(4, "Vertex-expansion checker oracle", 0, [] {
    std::size_t compared = 0, mismatches = 0, missing = 0;
    for (std::size_t n = 2; n <= 12; ++n) {
      for (std::size_t d = 1; d <= std::min<std::size_t>(n, 4); ++d) {
        const auto g = build_random_regular_bipartite(n, d, 7 * n + d);
        const auto reports = check_expansion(g, 0.25, {ExpansionMode::exhaustive});
        std::size_t expected_subsets = 0;
        std::size_t idx = 0;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
          if (static_cast<std::size_t>(std::popcount(mask)) > n / 2) continue;
          ++expected_subsets;
          std::uint32_t reached = 0;
          for (std::size_t u = 0; u < n; ++u)
            if (mask >> u & 1u)
              for (Vertex v : g.neighbors(u)) reached |= 1u << v;
          if (idx >= reports.size()) {
            ++missing;
            continue;
          }
          std::uint32_t got = 0;
          for (Vertex u : reports[idx].subset) got |= 1u << u;
          mismatches += got != mask || reports[idx].neighborhood_size != std::size_t(std::popcount(reached));
          ++idx;
          ++compared;
        }
        missing += expected_subsets != reports.size();
      }
    }
    return Outcome{mismatches == 0 && missing == 0,
                   std::to_string(compared - mismatches) + "/" + std::to_string(compared) +
                       " subsets agree with bitset brute force, " + std::to_string(missing) + " count mismatches"};
  });

  criterion(5, "Sensitivity depth at n=256, D=8", 30.0, [] {
    std::vector<std::size_t> depths;
    bool all = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = sensitivity_depth(random_layered_network(256, 8, 16, seed * 1000));
      all &= r.fully_sensitive_at.has_value();
      depths.push_back(r.fully_sensitive_at.value_or(0));
    }
    const auto control = sensitivity_depth(LayeredNetwork(std::vector<BipartiteGraph>(16, identity_matching(256))));
    std::string list;
    for (auto d : depths) list += std::to_string(d) + " ";
    return Outcome{all && !control.fully_sensitive_at.has_value(),
                   "depths " + list + "(limit 16); identity control " +
                       (control.fully_sensitive_at ? "achieved" : "not achieved")};
  });

  criterion(6, "Path counts", 0, [] {
    Rng rng(66);
    std::size_t exact_ok = 0;
    for (int c = 0; c < 100; ++c) {
      const std::size_t n = 2 + rng.uniform_below(5);
      const std::size_t d = 1 + rng.uniform_below(n);
      const std::size_t t = 1 + rng.uniform_below(3);
      const auto net = random_layered_network(n, d, t, 5000 + c);
      const auto s = random_subset_of(n, 1 + rng.uniform_below(n), rng);
      const auto tt = random_subset_of(n, 1 + rng.uniform_below(n), rng);
      std::vector<char> in_t(n, 0);
      for (Vertex v : tt) in_t[v] = 1;
      std::uint64_t dfs = 0;
      for (Vertex u : s) dfs += dfs_paths(net, 0, u, in_t);
      exact_ok += count_paths(net, s, tt, std::vector<double>(t, 0.0)).exact_count == BigInt(dfs);
    }
    const auto net = random_layered_network(256, 8, 3, 606);
    std::vector<double> gammas;
    for (const auto& layer : net.layers()) gammas.push_back(estimate_second_eigenvalue(layer).gamma);
    std::size_t concentrated = 0;
    double worst = 0.0;
    for (int p = 0; p < 50; ++p) {
      const auto s = random_subset_of(256, 32, rng);
      const auto t = random_subset_of(256, 32, rng);
      const auto r = count_paths(net, s, t, gammas);
      concentrated += r.relative_deviation <= 0.5;
      worst = std::max(worst, r.relative_deviation);
    }
    return Outcome{exact_ok == 100 && concentrated >= 45,
                   std::to_string(exact_ok) + "/100 small cases equal DFS; " + std::to_string(concentrated) +
                       "/50 pairs within 0.5 relative deviation (worst " + fmt("%.3f", worst) + ")"};
  });

  criterion(7, "Mask arithmetic from the tables", 0, [] {
    const auto fc = xlinear_mask(4096, 9216, 1024, std::uint64_t{1});
    const auto conv = xconv_mask(256, 128, 32, Kernel{3, 3}, std::uint64_t{1});
    const bool ok = fc.active_parameters() == 4194304u && fc.dense_parameters() == 37748736u &&
                    conv.active_parameters() == 73728u && conv.dense_parameters() == 294912u;
    return Outcome{ok, "X-AlexNet-1 fc " + std::to_string(fc.active_parameters()) + " vs " +
                           std::to_string(fc.dense_parameters()) + "; X-VGG16-1 conv " +
                           std::to_string(conv.active_parameters()) + " vs " + std::to_string(conv.dense_parameters())};
  });

  criterion(8, "Cost formulas", 0, [] {
    Rng rng(88);
    std::size_t grouped_ok = 0, grouped_total = 0;
    for (int i = 0; i < 100; ++i) {
      for (std::uint64_t g : {2u, 4u, 8u}) {
        LayerSpec s;
        s.kind = rng.uniform_below(2) ? LayerKind::dense_conv : LayerKind::grouped_pointwise;
        s.c_in = g * (1 + rng.uniform_below(32));
        s.c_out = g * (1 + rng.uniform_below(32));
        s.kernel_h = s.kernel_w = s.kind == LayerKind::dense_conv ? 1 + 2 * rng.uniform_below(3) : 1;
        s.out_h = 1 + rng.uniform_below(64);
        s.out_w = 1 + rng.uniform_below(64);
        s.groups = g;
        const auto a = count(s);
        const auto b = count(dense_equivalent(s));
        grouped_ok += a.macs * g == b.macs && a.params * g == b.params;
        ++grouped_total;
      }
    }
    std::size_t ratio_ok = 0, ratio_total = 0;
    for (int i = 0; i < 100; ++i) {
      LayerSpec s;
      s.kind = LayerKind::depthwise_separable;
      s.c_in = 1 + rng.uniform_below(128);
      s.c_out = i == 0 ? 64 : 1 + rng.uniform_below(256);
      s.kernel_h = s.kernel_w = i == 0 ? 3 : 1 + 2 * rng.uniform_below(4);
      s.out_h = 1 + rng.uniform_below(32);
      s.out_w = 1 + rng.uniform_below(32);
      const auto ratio = Ratio::of(count(s).macs, count(dense_equivalent(s)).macs);
      ratio_ok += ratio == Ratio::of(1, s.c_out) + Ratio::of(1, s.kernel_h * s.kernel_w);
      ++ratio_total;
    }
    const auto erf = count_model(load_layer_specs(XNET_DATA_DIR "/erfnet.layers"));
    const double gmacs = double(erf.macs) / 1e9;
    const double dev = gmacs / 27.705 - 1.0;
    return Outcome{grouped_ok == grouped_total && ratio_ok == ratio_total,
                   std::to_string(grouped_ok) + "/" + std::to_string(grouped_total) + " grouped = dense/g; " +
                       std::to_string(ratio_ok) + "/" + std::to_string(ratio_total) +
                       " separable ratios exact; ERFNet " + fmt("%.3f", gmacs) + " G mult-adds (" +
                       fmt("%.3f", 2 * gmacs) + " G at 2 flops/MAC) vs 27.705 reported, " + fmt("%+.1f%%", 100 * dev) +
                       (std::abs(dev) <= 0.15 ? " within" : " outside") + " the soft 15% band"};
  });

  criterion(9, "Gradient correctness", 0, [] {
    using namespace xnet::nn;
    std::vector<std::pair<std::string, MaskFactory>> kinds{
        {"dense", [](std::size_t o, std::size_t i) { return dense_mask(o, i); }},
        {"group2", [](std::size_t o, std::size_t i) { return group_mask(o, i, 2); }},
        {"group4", [](std::size_t o, std::size_t i) { return group_mask(o, i, 4); }},
        {"group8", [](std::size_t o, std::size_t i) { return group_mask(o, i, 8); }},
        {"expander2", [](std::size_t o, std::size_t i) { return xlinear_mask(o, i, 2, std::uint64_t{3}); }},
        {"expander4", [](std::size_t o, std::size_t i) { return xlinear_mask(o, i, 4, std::uint64_t{5}); }},
    };
    const double h = 1e-4;
    std::size_t checked = 0, failed = 0;
    std::string first_failure;
    for (const auto& [name, factory] : kinds) {
      for (double alpha : {0.0, 0.3, 1.0}) {
        const std::vector<std::size_t> widths{16, 16, 8, 3};
        Model model = build_mlp(widths, factory, 31);
        model.set_alpha(alpha);
        Rng rng(32);
        for (std::size_t l = 0; l < model.size(); ++l)
          for (Eigen::Index i = 0; i < model.layer(l).bias().size(); ++i)
            model.layer(l).bias()(i) = 0.5 + 0.1 * rng.normal();
        Eigen::MatrixXd x(5, 16);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        const std::vector<int> y{0, 1, 2, 1, 0};
        auto loss_of = [&](const Eigen::MatrixXd& in) { return softmax_cross_entropy(model.evaluate(in), y).loss; };
        const auto loss = softmax_cross_entropy(model.forward(x), y);
        const auto grads = model.backward(loss.gradient);
        // Five-point central stencil, truncation O(h^4).
        auto check = [&](double analytic, double& slot, const Eigen::MatrixXd& in) {
          const double saved = slot;
          auto at = [&](double offset) {
            slot = saved + offset;
            return loss_of(in);
          };
          const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
          slot = saved;
          ++checked;
          if (relative_gap(analytic, numeric) > 1e-5) {
            ++failed;
            if (first_failure.empty()) first_failure = name + " alpha=" + fmt("%.1f", alpha);
          }
        };
        for (std::size_t l = 0; l < model.size(); ++l) {
          auto& layer = model.layer(l);
          for (Eigen::Index i = 0; i < layer.weights().rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weights().cols(); ++j) check(grads[l].weights(i, j), layer.weights()(i, j), x);
            check(grads[l].bias(i), layer.bias()(i), x);
          }
        }
        Eigen::MatrixXd xin = x;
        for (Eigen::Index i = 0; i < xin.rows(); ++i)
          for (Eigen::Index j = 0; j < xin.cols(); ++j) check(grads[0].input(i, j), xin(i, j), xin);
      }
    }
    return Outcome{failed == 0, std::to_string(failed) + " failures in " + std::to_string(checked) +
                                    " finite-difference checks over 6 mask kinds x 3 alphas" +
                                    (first_failure.empty() ? "" : ", first in " + first_failure)};
  });

  criterion(10, "Gradual grouping at desk scale", 120.0, [] {
    using namespace xnet::nn;
    const std::vector<std::size_t> widths{16, 32, 32, 4};
    auto group4 = [](std::size_t o, std::size_t i) { return group_mask(o, i, 4); };
    double sum_gradual = 0, sum_direct = 0, worst_equiv = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto data = gaussian_mixture(4, 16, 2000, 1.0, seed);
      const auto [train, test] = split(data, 0.8, seed + 100);
      TrainConfig cfg;
      cfg.epochs = 20;
      cfg.learning_rate = 5e-3;
      cfg.seed = seed;
      Model direct = build_mlp(widths, group4, seed);
      const auto rd = Trainer(cfg).train(direct, train, &test);
      cfg.alpha_schedule = AlphaSchedule::halves(cfg.epochs);
      Model gradual = build_mlp(widths, group4, seed);
      const auto rg = Trainer(cfg).train(gradual, train, &test);
      sum_gradual += rg.final_grouped_accuracy;
      sum_direct += rd.final_grouped_accuracy;
      per_seed += fmt("%.3f", rg.final_grouped_accuracy) + "/" + fmt("%.3f", rd.final_grouped_accuracy) + " ";
      const auto masked = gradual.evaluate(test.features);
      const auto grouped = gradual.grouped_inference(test.features);
      worst_equiv = std::max(worst_equiv, (masked - grouped).cwiseAbs().maxCoeff());
    }
    const double gradual = sum_gradual / 5, direct = sum_direct / 5;
    return Outcome{gradual >= direct - 0.01 && worst_equiv <= 1e-6,
                   "mean grouped test accuracy gradual " + fmt("%.4f", gradual) + " vs direct " + fmt("%.4f", direct) +
                       " (per seed gradual/direct: " + per_seed + "); grouped vs masked max |diff| " +
                       fmt("%.1e", worst_equiv)};
  });

  criterion(11, "Shuffle reachability", 0, [] {
    std::size_t configs = 0, ok = 0;
    for (std::size_t c = 1; c <= 64; ++c) {
      for (std::size_t g = 1; g <= c; ++g) {
        if (c % g || c / g < g) continue;
        ++configs;
        const auto m = group_mask(c, c, g);
        const std::vector<ConnectivityMask> masks{m, m};
        const auto plain = compose_reachability(masks);
        const std::vector<std::vector<Vertex>> between{shuffle_permutation(c, g)};
        const auto mixed = compose_reachability(masks, between);
        const std::size_t w = c / g;
        bool block_diagonal = true;
        for (std::size_t o = 0; o < c; ++o)
          for (std::size_t i = 0; i < c; ++i) block_diagonal &= plain[o * c + i] == ((o / w == i / w) ? 1 : 0);
        const bool full = std::all_of(mixed.begin(), mixed.end(), [](std::uint8_t v) { return v == 1; });
        ok += block_diagonal && full;
      }
    }
    return Outcome{ok == configs, std::to_string(ok) + "/" + std::to_string(configs) +
                                      " (channels, g) configurations block-diagonal without shuffle and full with it"};
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures ? 1 : 0;
}
