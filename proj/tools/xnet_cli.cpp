#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "xnet/xnet.hpp"

namespace fs = std::filesystem;
using namespace xnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitViolation = 2;
constexpr int kExitResource = 3;

std::string hash_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return detail::hex64(h);
}

// Run state shared by every subcommand: flags, provenance and outputs.
struct Context {
  bool json = false;
  std::size_t threads = 1;
  std::vector<std::string> arguments;
  std::string command;
  Json seeds = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string output_path(const std::string& path) {
    fs::path p(path);
    if (const char* dir = std::getenv("XNET_OUTPUT_DIR"); dir && *dir && p.is_relative()) p = fs::path(dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    outputs.push_back(p.string());
    return p.string();
  }

  std::string input_path(const std::string& path) {
    inputs.push_back(path);
    return path;
  }

  void write_text(const std::string& path, const std::string& text) { detail::write_file(output_path(path), text); }

  void emit(const Json& j, const std::string& human) const {
    if (json) {
      std::cout << j.dump(2) << '\n';
    } else {
      std::cout << human;
    }
  }

  void write_manifest() const {
    if (outputs.empty()) return;
    Json outs = Json::array();
    for (const auto& p : outputs) outs.push_back(Json{{"path", p}, {"fnv1a64", hash_bytes(detail::read_file(p))}});
    const char* dir = std::getenv("XNET_OUTPUT_DIR");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json m{{"command", command},
           {"arguments", arguments},
           {"seeds", seeds},
           {"inputs", inputs},
           {"outputs", outs},
           {"working_directory", fs::current_path().string()},
           {"output_dir", dir ? dir : ""},
           {"tool_version", kVersion},
           {"wall_time_seconds", wall}};
    detail::write_file(outputs.front() + ".manifest.json", m.dump(2) + "\n");
  }
};

std::vector<Vertex> parse_vertices(const std::string& text) {
  std::vector<Vertex> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const unsigned long v = std::stoul(item, &pos);
    if (pos != item.size()) throw InvalidParameter("bad vertex index '" + item + "'");
    out.push_back(static_cast<Vertex>(v));
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  for (Vertex v : parse_vertices(text)) out.push_back(v);
  return out;
}

// {"layers": [xgraph paths]} or {"generate": {n, d, depth, seed, construction}}.
LayeredNetwork load_network(Context& ctx, const std::string& path) {
  const Json j = Json::parse(detail::read_file(ctx.input_path(path)), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError(path + ": not a JSON object", 0);
  if (j.contains("layers")) {
    std::vector<BipartiteGraph> layers;
    const fs::path base = fs::path(path).parent_path();
    for (const auto& entry : j.at("layers")) {
      fs::path p(entry.get<std::string>());
      if (p.is_relative()) p = base / p;
      layers.push_back(load_xgraph(ctx.input_path(p.string())));
    }
    return LayeredNetwork(std::move(layers));
  }
  if (j.contains("generate")) {
    const auto& g = j.at("generate");
    const auto n = g.at("n").get<std::size_t>();
    const auto depth = g.at("depth").get<std::size_t>();
    const std::string construction = g.value("construction", "random");
    if (construction == "identity") return LayeredNetwork(std::vector<BipartiteGraph>(depth, identity_matching(n)));
    const auto d = g.at("d").get<std::size_t>();
    const auto seed = g.at("seed").get<std::uint64_t>();
    ctx.seeds["network"] = seed;
    if (construction == "random") return random_layered_network(n, d, depth, seed);
    if (construction == "dedup") return random_layered_network(n, d, depth, seed, EdgeMode::dedup);
    throw InvalidParameter("unknown construction '" + construction + "'");
  }
  throw FormatError(path + ": expected a \"layers\" or \"generate\" key", 0);
}

LayeredNetwork truncate(const LayeredNetwork& net, std::size_t depth) {
  if (depth >= net.depth()) return net;
  std::vector<BipartiteGraph> layers(net.layers().begin(), net.layers().begin() + static_cast<std::ptrdiff_t>(depth));
  return LayeredNetwork(std::move(layers));
}

SpectralReport spectrum_of(const BipartiteGraph& g, const std::string& method, double tol,
                           std::optional<std::size_t> max_iter, std::uint64_t seed) {
  if (method == "dense") return dense_second_eigenvalue(g);
  return estimate_second_eigenvalue(g, {tol, max_iter, seed});
}

// ---------------------------------------------------------------------------

struct GraphGenOptions {
  bool cayley = false;
  bool dedup = false;
  std::size_t n = 0;
  std::size_t d = 0;
  unsigned k = 0;
  double epsilon = 0.5;
  double constant = ExpanderBudget::kDefaultConstant;
  std::size_t generators = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int graph_gen(Context& ctx, const GraphGenOptions& o) {
  ctx.seeds["graph"] = o.seed;
  Json summary = Json::object();
  std::optional<BipartiteGraph> g;
  if (o.cayley) {
    if (o.k == 0) throw InvalidParameter("--cayley requires -k");
    const auto budget = o.generators ? ExpanderBudget::with_count(o.generators)
                                     : ExpanderBudget::for_dimension(o.k, o.epsilon, o.constant);
    const auto cayley = build_cayley_xor_graph(o.k, sample_generators(o.k, budget, o.seed));
    g = bipartite_double_cover(cayley);
    summary["generators"] = Json(std::vector<Word>(cayley.generators().begin(), cayley.generators().end()));
    if (o.k <= kMaxExactCayleyDimension) summary["gamma"] = cayley_spectral_report(cayley).gamma;
  } else {
    if (o.n == 0 || o.d == 0) throw InvalidParameter("random graphs require -n and -d");
    g = build_random_regular_bipartite(o.n, o.d, o.seed, o.dedup ? EdgeMode::dedup : EdgeMode::keep_parallel);
  }
  save_xgraph(*g, ctx.output_path(o.out));
  Json j{{"graph_id", g->id()},
         {"construction", to_string(g->construction())},
         {"n_left", g->n_left()},
         {"n_right", g->n_right()},
         {"degree", g->degree()},
         {"parallel_edges", g->has_parallel_edges()},
         {"output", ctx.outputs.front()}};
  j.update(summary);
  ctx.emit(j, "wrote " + ctx.outputs.front() + " (" + g->id() + ")\n");
  return kExitOk;
}

struct SpectrumOptions {
  std::string input;
  bool cayley = false;
  unsigned k = 0;
  double epsilon = 0.5;
  double constant = ExpanderBudget::kDefaultConstant;
  std::size_t generators = 0;
  std::string method = "power";
  double tol = 1e-8;
  std::optional<std::size_t> max_iter;
  std::uint64_t seed = 0;
  std::string out;
};

int graph_spectrum(Context& ctx, const SpectrumOptions& o) {
  ctx.seeds["spectrum"] = o.seed;
  std::string id;
  SpectralReport spec;
  if (o.cayley) {
    if (o.k == 0) throw InvalidParameter("--cayley requires -k");
    const auto budget = o.generators ? ExpanderBudget::with_count(o.generators)
                                     : ExpanderBudget::for_dimension(o.k, o.epsilon, o.constant);
    const auto cayley = build_cayley_xor_graph(o.k, sample_generators(o.k, budget, o.seed));
    spec = o.method == "power" ? estimate_second_eigenvalue(cayley.to_undirected(), {o.tol, o.max_iter, o.seed})
                               : cayley_spectral_report(cayley);
    id = bipartite_double_cover(cayley).id();
  } else {
    if (o.input.empty()) throw InvalidParameter("either -i or --cayley is required");
    const auto g = load_xgraph(ctx.input_path(o.input));
    if (o.method == "character-sum") throw InvalidParameter("character-sum needs --cayley");
    spec = spectrum_of(g, o.method, o.tol, o.max_iter, o.seed);
    id = g.id();
  }
  const auto j = spectral_json(id, spec);
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  std::ostringstream human;
  human << "lambda2 = " << spec.lambda2 << ", gamma = " << spec.gamma << " (" << to_string(spec.method) << ")\n";
  ctx.emit(j, human.str());
  return kExitOk;
}

struct MixingOptions {
  std::string input;
  bool exhaustive = false;
  std::size_t pairs = 100;
  std::size_t subset_size = 0;
  std::string bound = "both";
  std::string method = "power";
  std::uint64_t seed = 0;
  std::string out;
};

int verify_mixing(Context& ctx, const MixingOptions& o) {
  ctx.seeds["verify"] = o.seed;
  const auto g = load_xgraph(ctx.input_path(o.input));
  const auto spec = spectrum_of(g, o.method, 1e-8, std::nullopt, o.seed);
  const bool check_standard = o.bound != "paper";
  const bool check_paper = o.bound != "standard";
  Json checks = Json::array();
  std::size_t violations = 0;
  if (o.exhaustive) {
    const auto summary = check_mixing_exhaustive(g, spec, ctx.threads);
    violations = (check_standard ? summary.standard_violations : 0) + (check_paper ? summary.paper_violations : 0);
    checks.push_back(to_json(summary));
  } else {
    Rng rng(o.seed);
    const std::size_t size = o.subset_size ? o.subset_size : std::max<std::size_t>(1, g.n_left() / 4);
    MixingSweepSummary summary;
    std::vector<Json> reports;
    for (std::size_t p = 0; p < o.pairs; ++p) {
      const auto s = random_subset(g.n_left(), size, rng);
      const auto t = random_subset(g.n_right(), size, rng);
      const auto r = check_mixing(g, s, t, spec);
      ++summary.pairs;
      summary.standard_violations += !r.pass_standard;
      summary.paper_violations += !r.pass_paper;
      if (r.bound_standard > 0)
        summary.worst_standard_ratio = std::max(summary.worst_standard_ratio, r.deviation / r.bound_standard);
      reports.push_back(to_json(r));
    }
    violations = (check_standard ? summary.standard_violations : 0) + (check_paper ? summary.paper_violations : 0);
    checks.push_back(to_json(summary));
    for (auto& r : reports) checks.push_back(std::move(r));
  }
  const auto j = spectral_json(g.id(), spec, checks);
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  ctx.emit(j, std::to_string(violations) + " mixing violation(s) against the " + o.bound + " bound\n");
  return violations ? kExitViolation : kExitOk;
}

struct ExpansionCliOptions {
  std::string input;
  std::optional<double> gamma;
  bool exhaustive = false;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int verify_expansion(Context& ctx, const ExpansionCliOptions& o) {
  ctx.seeds["verify"] = o.seed;
  const auto g = load_xgraph(ctx.input_path(o.input));
  const auto spec = estimate_second_eigenvalue(g, {1e-8, std::nullopt, o.seed});
  const double gamma = o.gamma.value_or(spec.gamma);
  const auto reports = check_expansion(
      g, gamma, {o.exhaustive ? ExpansionMode::exhaustive : ExpansionMode::sampled, o.samples, o.seed, ctx.threads});
  std::size_t violations = 0;
  for (const auto& r : reports) violations += !r.satisfied;
  Json checks = Json::array();
  checks.push_back(Json{{"kind", "expansion-summary"},
                        {"mode", o.exhaustive ? "exhaustive" : "sampled"},
                        {"gamma_used", gamma},
                        {"subsets", reports.size()},
                        {"violations", violations}});
  for (const auto& r : reports)
    if (!r.satisfied) checks.push_back(to_json(r));
  const auto j = spectral_json(g.id(), spec, checks);
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  ctx.emit(j, std::to_string(violations) + " of " + std::to_string(reports.size()) + " subsets violate expansion\n");
  return violations ? kExitViolation : kExitOk;
}

struct SensitivityOptions {
  std::string net;
  std::optional<std::size_t> tmax;
  bool growth = false;
  std::uint64_t seed = 0;
  std::string csv;
  std::string out;
};

int verify_sensitivity(Context& ctx, const SensitivityOptions& o) {
  const auto full = load_network(ctx, o.net);
  const std::size_t n = full.input_width();
  const std::size_t tmax = o.tmax.value_or(4 * std::max<std::size_t>(1, std::bit_width(n - 1)));
  const auto net = truncate(full, tmax);
  std::vector<double> gammas;
  if (o.growth) {
    ctx.seeds["spectrum"] = o.seed;
    for (const auto& layer : net.layers()) gammas.push_back(estimate_second_eigenvalue(layer, {1e-8, std::nullopt, o.seed}).gamma);
  }
  const auto report = sensitivity_depth(net, gammas, ctx.threads);
  const auto j = sensitivity_json(report);
  if (!o.csv.empty()) ctx.write_text(o.csv, frontier_csv(report));
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  const std::string verdict = report.fully_sensitive_at
                                  ? "fully sensitive at depth " + std::to_string(*report.fully_sensitive_at)
                                  : std::string("not achieved");
  ctx.emit(j, verdict + " (tested " + std::to_string(report.depth_tested) + " layers)\n");
  const bool failed = !report.fully_sensitive_at || report.growth_ok == false;
  return failed ? kExitViolation : kExitOk;
}

struct PathsOptions {
  std::string net;
  std::string s;
  std::string t;
  std::size_t subset_size = 0;
  std::size_t pairs = 1;
  std::optional<std::size_t> depth;
  std::uint64_t seed = 0;
  std::string out;
};

int verify_paths(Context& ctx, const PathsOptions& o) {
  const auto full = load_network(ctx, o.net);
  const auto net = truncate(full, o.depth.value_or(full.depth()));
  std::vector<double> gammas;
  for (const auto& layer : net.layers()) gammas.push_back(estimate_second_eigenvalue(layer).gamma);
  Json checks = Json::array();
  std::size_t outside = 0;
  auto run = [&](const std::vector<Vertex>& s, const std::vector<Vertex>& t) {
    const auto r = count_paths(net, s, t, gammas);
    outside += !r.within_bound;
    checks.push_back(to_json(r));
  };
  if (!o.s.empty() || !o.t.empty()) {
    run(parse_vertices(o.s), parse_vertices(o.t));
  } else {
    if (o.subset_size == 0) throw InvalidParameter("give --s/--t or --subset-size with --seed");
    ctx.seeds["subsets"] = o.seed;
    Rng rng(o.seed);
    for (std::size_t p = 0; p < o.pairs; ++p) {
      const auto s = random_subset(net.input_width(), o.subset_size, rng);
      const auto t = random_subset(net.output_width(), o.subset_size, rng);
      run(s, t);
    }
  }
  Json j{{"depth", net.depth()}, {"width", net.input_width()}, {"outside_bound", outside}, {"checks", checks}};
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  ctx.emit(j, std::to_string(outside) + " of " + std::to_string(checks.size()) + " path counts outside the bound\n");
  return outside ? kExitViolation : kExitOk;
}

struct MaskOptions {
  std::string kind = "xlinear";
  std::size_t n_out = 0;
  std::size_t n_in = 0;
  std::size_t fan_in = 0;
  std::size_t groups = 1;
  std::size_t kernel = 1;
  std::string graph;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int mask_gen(Context& ctx, const MaskOptions& o) {
  if (o.n_out == 0 || o.n_in == 0) throw InvalidParameter("--n-out and --n-in are required");
  const std::optional<Kernel> kernel =
      o.kernel > 1 ? std::optional<Kernel>(Kernel{o.kernel, o.kernel}) : std::nullopt;
  auto source = [&]() -> std::optional<BipartiteGraph> {
    if (!o.graph.empty()) return load_xgraph(ctx.input_path(o.graph));
    if (!o.seed) throw InvalidParameter("expander masks need --seed or --graph");
    ctx.seeds["mask"] = *o.seed;
    return std::nullopt;
  };
  std::optional<ConnectivityMask> m;
  if (o.kind == "dense") {
    m = dense_mask(o.n_out, o.n_in, kernel);
  } else if (o.kind == "group") {
    m = group_mask(o.n_out, o.n_in, o.groups, kernel);
  } else {
    const auto g = source();
    const Kernel k{o.kernel, o.kernel};
    if (o.kind == "xconv") {
      m = g ? xconv_mask(o.n_out, o.n_in, o.fan_in, k, std::cref(*g)) : xconv_mask(o.n_out, o.n_in, o.fan_in, k, *o.seed);
    } else {
      m = g ? xlinear_mask(o.n_out, o.n_in, o.fan_in, std::cref(*g)) : xlinear_mask(o.n_out, o.n_in, o.fan_in, *o.seed);
    }
  }
  save_xmask(*m, ctx.output_path(o.out));
  Json j{{"kind", to_string(m->kind())},
         {"n_out", m->n_out()},
         {"n_in", m->n_in()},
         {"fan_in", m->fan_in()},
         {"active_parameters", m->active_parameters()},
         {"dense_parameters", m->dense_parameters()},
         {"source_graph_id", m->source_graph_id()},
         {"output", ctx.outputs.front()}};
  ctx.emit(j, "wrote " + ctx.outputs.front() + ": " + std::to_string(m->active_parameters()) + " of " +
                  std::to_string(m->dense_parameters()) + " parameters active\n");
  return kExitOk;
}

struct TrainOptions {
  std::string dataset = "gaussian";
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t samples = 2000;
  double separation = 1.0;
  std::size_t bits = 8;
  std::string idx_images;
  std::string idx_labels;
  std::string widths;
  std::string mask = "group";
  std::size_t groups = 4;
  std::size_t fan_in = 4;
  std::string schedule = "gradual";
  std::string curve = "linear";
  std::size_t epochs = 20;
  double lr = 5e-3;
  std::size_t batch = 32;
  std::string optimizer = "adam";
  double train_fraction = 0.8;
  std::size_t encoder_layers = 0;
  double frozen_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
};

int train(Context& ctx, const TrainOptions& o) {
  ctx.seeds["train"] = o.seed;
  nn::Dataset data;
  if (o.dataset == "gaussian") {
    data = nn::gaussian_mixture(o.classes, o.dim, o.samples, o.separation, o.seed);
  } else if (o.dataset == "parity") {
    data = nn::parity(o.bits, o.samples, o.seed);
  } else {
    if (o.idx_images.empty() || o.idx_labels.empty()) throw InvalidParameter("idx data needs --idx-images and --idx-labels");
    data = nn::load_idx_dataset(ctx.input_path(o.idx_images), ctx.input_path(o.idx_labels));
  }
  const auto [train_set, test_set] = nn::split(data, o.train_fraction, o.seed + 1);
  auto widths = o.widths.empty() ? std::vector<std::size_t>{data.width(), 32, 32, data.num_classes}
                                 : parse_widths(o.widths);
  if (widths.front() != data.width()) throw InvalidParameter("first width must equal the input dimension");
  if (widths.back() != data.num_classes) throw InvalidParameter("last width must equal the class count");
  nn::MaskFactory factory;
  if (o.mask == "group") {
    factory = [g = o.groups](std::size_t out, std::size_t in) { return group_mask(out, in, g); };
  } else if (o.mask == "expander") {
    factory = [f = o.fan_in, s = o.seed](std::size_t out, std::size_t in) { return xlinear_mask(out, in, f, s); };
  } else {
    factory = [](std::size_t out, std::size_t in) { return dense_mask(out, in); };
  }
  auto model = nn::build_mlp(widths, factory, o.seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.optimizer = o.optimizer == "sgd" ? nn::OptimizerKind::sgd : nn::OptimizerKind::adam;
  cfg.batch_size = o.batch;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.encoder_layers = o.encoder_layers;
  cfg.frozen_fraction = o.frozen_fraction;
  if (o.schedule == "gradual") {
    cfg.alpha_schedule = nn::AlphaSchedule::halves(o.epochs, o.curve == "cosine" ? nn::AlphaCurve::cosine
                                                                                 : nn::AlphaCurve::linear);
  }
  const auto report = nn::Trainer(cfg).train(model, train_set, &test_set);
  ctx.write_text(o.out, report.to_csv());
  if (!o.checkpoint.empty()) {
    const auto path = ctx.output_path(o.checkpoint);
    nn::save_checkpoint(model, path);
    for (std::size_t i = 0; i < model.size(); ++i) ctx.outputs.push_back(path + ".layer" + std::to_string(i) + ".xmask");
  }
  const auto& last = report.epochs.back();
  Json j{{"epochs", report.epochs.size()},
         {"final_loss", last.loss},
         {"final_train_accuracy", last.accuracy},
         {"final_alpha", last.alpha},
         {"active_params", last.active_params},
         {"grouped_test_accuracy", report.final_grouped_accuracy},
         {"report", ctx.outputs.front()}};
  std::ostringstream human;
  human << "grouped test accuracy " << report.final_grouped_accuracy << " after " << report.epochs.size()
        << " epochs\n";
  ctx.emit(j, human.str());
  return kExitOk;
}

struct AccountOptions {
  std::string spec;
  bool bias = false;
  std::string csv;
  std::string out;
};

int account(Context& ctx, const AccountOptions& o) {
  const auto specs = load_layer_specs(ctx.input_path(o.spec));
  const CountOptions opt{o.bias};
  const auto j = accounting_json(specs, opt);
  if (!o.csv.empty()) ctx.write_text(o.csv, accounting_csv(specs, opt));
  if (!o.out.empty()) ctx.write_text(o.out, j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run(const std::vector<std::string>& args);

int rerun(const std::string& manifest_path, bool check) {
  const Json m = Json::parse(detail::read_file(manifest_path));
  std::map<std::string, std::string> expected;
  for (const auto& o : m.at("outputs")) expected[o.at("path").get<std::string>()] = o.at("fnv1a64").get<std::string>();
  const auto old_cwd = fs::current_path();
  fs::current_path(m.at("working_directory").get<std::string>());
  const std::string dir = m.value("output_dir", "");
  if (dir.empty()) {
    unsetenv("XNET_OUTPUT_DIR");
  } else {
    setenv("XNET_OUTPUT_DIR", dir.c_str(), 1);
  }
  const int code = run(m.at("arguments").get<std::vector<std::string>>());
  std::size_t mismatches = 0;
  for (const auto& [path, hash] : expected) {
    const bool same = fs::exists(path) && hash_bytes(detail::read_file(path)) == hash;
    if (!same) {
      ++mismatches;
      std::cerr << "output differs: " << path << '\n';
    }
  }
  fs::current_path(old_cwd);
  if (code != kExitOk && code != kExitViolation) return code;
  if (check && mismatches) return kExitViolation;
  return code;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Expander-graph connectivity toolkit", "xnet"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.arguments = args;
  app.add_flag("--json", ctx.json, "Print the report as JSON");
  app.add_option("--threads", ctx.threads, "Worker threads for verification sweeps")->check(CLI::PositiveNumber);

  auto* graph = app.add_subcommand("graph", "Generate or analyse bipartite layers")->require_subcommand(1);
  GraphGenOptions gg;
  auto* gen = graph->add_subcommand("gen", "Generate a regular bipartite layer");
  gen->add_flag("--cayley", gg.cayley, "Bipartite double cover of an XOR Cayley graph");
  gen->add_flag("--dedup", gg.dedup, "Repair parallel edges in the permutation construction");
  gen->add_option("-n", gg.n, "Vertices per side");
  gen->add_option("-d", gg.d, "Degree");
  gen->add_option("-k", gg.k, "Cayley dimension (2^k vertices)");
  gen->add_option("--epsilon", gg.epsilon, "Target gap 1 - epsilon for the generator budget");
  gen->add_option("--c", gg.constant, "Budget constant in |H| = ceil(c k^2 / epsilon^2)");
  gen->add_option("--generators", gg.generators, "Explicit generator count");
  gen->add_option("--seed", gg.seed, "Random seed")->required();
  gen->add_option("-o,--output", gg.out, "Output XGRAPH path")->required();

  SpectrumOptions sp;
  auto* spectrum = graph->add_subcommand("spectrum", "Estimate lambda2 and the spectral gap");
  spectrum->add_option("-i,--input", sp.input, "XGRAPH file");
  spectrum->add_flag("--cayley", sp.cayley, "Regenerate a Cayley graph from -k/--epsilon/--seed");
  spectrum->add_option("-k", sp.k, "Cayley dimension");
  spectrum->add_option("--epsilon", sp.epsilon, "Target gap 1 - epsilon");
  spectrum->add_option("--c", sp.constant, "Budget constant");
  spectrum->add_option("--generators", sp.generators, "Explicit generator count");
  spectrum->add_option("--method", sp.method, "power | dense | character-sum")
      ->check(CLI::IsMember({"power", "dense", "character-sum"}));
  spectrum->add_option("--tol", sp.tol, "Power iteration tolerance");
  spectrum->add_option("--max-iter", sp.max_iter, "Power iteration limit");
  spectrum->add_option("--seed", sp.seed, "Seed for generators and the start vector")->required();
  spectrum->add_option("-o,--output", sp.out, "JSON report path");

  auto* verify = app.add_subcommand("verify", "Check graph-theoretic properties")->require_subcommand(1);
  MixingOptions mx;
  auto* mixing = verify->add_subcommand("mixing", "Expander mixing lemma");
  mixing->add_option("-i,--input", mx.input, "XGRAPH file")->required();
  mixing->add_flag("--exhaustive", mx.exhaustive, "All nonempty S, T (n <= 12)");
  mixing->add_option("--pairs", mx.pairs, "Random (S, T) pairs");
  mixing->add_option("--subset-size", mx.subset_size, "Size of each random subset");
  mixing->add_option("--bound", mx.bound, "standard | paper | both")->check(CLI::IsMember({"standard", "paper", "both"}));
  mixing->add_option("--method", mx.method, "power | dense")->check(CLI::IsMember({"power", "dense"}));
  mixing->add_option("--seed", mx.seed, "Seed for subsets and the start vector")->required();
  mixing->add_option("-o,--output", mx.out, "JSON report path");

  ExpansionCliOptions ex;
  auto* expansion = verify->add_subcommand("expansion", "Vertex expansion |N(S)| >= (1 + gamma)|S|");
  expansion->add_option("-i,--input", ex.input, "XGRAPH file")->required();
  expansion->add_option("--gamma", ex.gamma, "Claimed gap (default: estimated)");
  expansion->add_flag("--exhaustive", ex.exhaustive, "All subsets up to n/2 (n <= 20)");
  expansion->add_option("--samples", ex.samples, "Sampled subsets");
  expansion->add_option("--seed", ex.seed, "Seed for sampling and the start vector")->required();
  expansion->add_option("-o,--output", ex.out, "JSON report path");

  SensitivityOptions se;
  auto* sensitivity = verify->add_subcommand("sensitivity", "Depth at which every input reaches every output");
  sensitivity->add_option("--net", se.net, "Network JSON")->required();
  sensitivity->add_option("--tmax", se.tmax, "Layers to test (default 4 ceil(log2 n))");
  sensitivity->add_flag("--growth", se.growth, "Audit frontier growth against per-layer gaps");
  sensitivity->add_option("--seed", se.seed, "Start-vector seed for --growth");
  sensitivity->add_option("--csv", se.csv, "Frontier CSV path");
  sensitivity->add_option("-o,--output", se.out, "JSON report path");

  PathsOptions pa;
  auto* paths = verify->add_subcommand("paths", "Exact layered path counts between S and T");
  paths->add_option("--net", pa.net, "Network JSON")->required();
  paths->add_option("--s", pa.s, "Comma-separated input vertices");
  paths->add_option("--t", pa.t, "Comma-separated output vertices");
  paths->add_option("--subset-size", pa.subset_size, "Random |S| = |T|");
  paths->add_option("--pairs", pa.pairs, "Random (S, T) pairs");
  paths->add_option("--depth", pa.depth, "Use the first t layers");
  paths->add_option("--seed", pa.seed, "Seed for random subsets");
  paths->add_option("-o,--output", pa.out, "JSON report path");

  auto* mask = app.add_subcommand("mask", "Connectivity masks")->require_subcommand(1);
  MaskOptions mk;
  auto* mgen = mask->add_subcommand("gen", "Generate a mask");
  mgen->add_option("--kind", mk.kind, "xlinear | xconv | group | dense")
      ->check(CLI::IsMember({"xlinear", "xconv", "group", "dense"}));
  mgen->add_option("--n-out", mk.n_out, "Output units or channels")->required();
  mgen->add_option("--n-in", mk.n_in, "Input units or channels")->required();
  mgen->add_option("--fan-in", mk.fan_in, "Active inputs per output (D)");
  mgen->add_option("--groups", mk.groups, "Group count");
  mgen->add_option("--kernel", mk.kernel, "Square kernel size");
  mgen->add_option("--graph", mk.graph, "XGRAPH supplying the connectivity");
  mgen->add_option("--seed", mk.seed, "Seed for expander masks");
  mgen->add_option("-o,--output", mk.out, "Output XMASK path")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a masked MLP with optional gradual grouping");
  train_cmd->add_option("--dataset", tr.dataset, "gaussian | parity | idx")
      ->check(CLI::IsMember({"gaussian", "parity", "idx"}));
  train_cmd->add_option("--classes", tr.classes, "Gaussian classes");
  train_cmd->add_option("--dim", tr.dim, "Gaussian dimension");
  train_cmd->add_option("--samples", tr.samples, "Synthetic sample count");
  train_cmd->add_option("--separation", tr.separation, "Gaussian centre spread");
  train_cmd->add_option("--bits", tr.bits, "Parity input bits");
  train_cmd->add_option("--idx-images", tr.idx_images, "IDX image file");
  train_cmd->add_option("--idx-labels", tr.idx_labels, "IDX label file");
  train_cmd->add_option("--widths", tr.widths, "Comma-separated layer widths");
  train_cmd->add_option("--mask", tr.mask, "group | expander | dense")->check(CLI::IsMember({"group", "expander", "dense"}));
  train_cmd->add_option("--groups", tr.groups, "Groups for group masks");
  train_cmd->add_option("--fan-in", tr.fan_in, "Fan-in for expander masks");
  train_cmd->add_option("--schedule", tr.schedule, "gradual | direct")->check(CLI::IsMember({"gradual", "direct"}));
  train_cmd->add_option("--curve", tr.curve, "linear | cosine")->check(CLI::IsMember({"linear", "cosine"}));
  train_cmd->add_option("--epochs", tr.epochs, "Epochs");
  train_cmd->add_option("--lr", tr.lr, "Learning rate");
  train_cmd->add_option("--batch", tr.batch, "Batch size");
  train_cmd->add_option("--optimizer", tr.optimizer, "adam | sgd")->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--train-fraction", tr.train_fraction, "Training share of the data");
  train_cmd->add_option("--encoder-layers", tr.encoder_layers, "Layers frozen in the first phase");
  train_cmd->add_option("--frozen-fraction", tr.frozen_fraction, "Share of epochs with a frozen encoder");
  train_cmd->add_option("--seed", tr.seed, "Seed for data, weights and batches")->required();
  train_cmd->add_option("-o,--output", tr.out, "TrainReport CSV path")->required();
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint path");

  AccountOptions ac;
  auto* account_cmd = app.add_subcommand("account", "Parameter and MAC counts from a layer spec file");
  account_cmd->add_option("--spec", ac.spec, "Layer spec file")->required();
  account_cmd->add_flag("--bias", ac.bias, "Include bias parameters");
  account_cmd->add_option("--csv", ac.csv, "CSV output path");
  account_cmd->add_option("-o,--output", ac.out, "JSON output path");

  std::string manifest;
  bool check = false;
  auto* rerun_cmd = app.add_subcommand("rerun", "Re-execute a run manifest");
  rerun_cmd->add_option("manifest", manifest, "Manifest JSON")->required();
  rerun_cmd->add_flag("--check", check, "Exit 2 if any output differs from the recorded hash");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e, std::cerr, std::cerr);
    if (dynamic_cast<const CLI::CallForHelp*>(&e) == nullptr) std::cerr << app.help();
    return kExitInvalid;
  }

  int code = kExitOk;
  if (rerun_cmd->parsed()) return rerun(manifest, check);
  if (gen->parsed()) {
    ctx.command = "graph gen";
    code = graph_gen(ctx, gg);
  } else if (spectrum->parsed()) {
    ctx.command = "graph spectrum";
    code = graph_spectrum(ctx, sp);
  } else if (mixing->parsed()) {
    ctx.command = "verify mixing";
    code = verify_mixing(ctx, mx);
  } else if (expansion->parsed()) {
    ctx.command = "verify expansion";
    code = verify_expansion(ctx, ex);
  } else if (sensitivity->parsed()) {
    ctx.command = "verify sensitivity";
    code = verify_sensitivity(ctx, se);
  } else if (paths->parsed()) {
    ctx.command = "verify paths";
    code = verify_paths(ctx, pa);
  } else if (mgen->parsed()) {
    ctx.command = "mask gen";
    code = mask_gen(ctx, mk);
  } else if (train_cmd->parsed()) {
    ctx.command = "train";
    code = train(ctx, tr);
  } else if (account_cmd->parsed()) {
    ctx.command = "account";
    code = account(ctx, ac);
  }
  ctx.write_manifest();
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InvalidState& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return kExitResource;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << " (best estimate " << e.best_estimate() << ")\n";
    return kExitResource;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitResource;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitResource;
  }
}
