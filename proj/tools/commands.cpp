#include "commands.hpp"

#include <CLI11.hpp>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fisum/corner_tree.hpp"
#include "fisum/engine.hpp"
#include "fisum/error.hpp"
#include "fisum/fis.hpp"
#include "fisum/io.hpp"
#include "fisum/memory.hpp"
#include "fisum/random.hpp"
#include "fisum/train.hpp"

namespace fisum::cli {

namespace {

/// Writes to `path` if given, else to `fallback`.
void emit(const std::optional<std::string>& path, std::string_view text, std::ostream& fallback) {
  if (path) {
    write_file(*path, text);
  } else {
    fallback << text;
  }
}

nlohmann::json value_json(Value v) {
  if (v == kNegInf) return "-inf";
  return v;
}

/// Accepts a tree, an array of trees or a layer checkpoint.
std::vector<CornerTree> load_trees(const std::string& path, std::size_t channels) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  std::vector<CornerTree> trees;
  if (j.is_object() && j.contains("config")) {
    for (const auto& tree : layer_from_json(text).trees()) {
      validate(tree, channels);
      trees.push_back(tree);
    }
  } else if (j.is_array()) {
    for (const auto& item : j) trees.push_back(tree_from_json(item.dump(), channels));
  } else {
    trees.push_back(tree_from_json(text, channels));
  }
  return trees;
}

std::filesystem::path indexed_path(const std::filesystem::path& base, std::size_t index) {
  std::filesystem::path p = base;
  p.replace_filename(base.stem().string() + "." + std::to_string(index) + base.extension().string());
  return p;
}

/// Random node function with small integer parameters, so real arithmetic in
/// the verification suite stays exact.
NodeFunction integer_node(SplitMix64& rng, std::size_t channels) {
  switch (rng.below(3)) {
    case 0:
      return Identity{rng.below(channels)};
    case 1:
      return Monomial{rng.below(channels), static_cast<unsigned>(rng.range(1, 2))};
    default: {
      LinearProjection lin;
      for (std::size_t c = 0; c < channels; ++c) lin.weights.push_back(static_cast<double>(rng.range(-2, 2)));
      return lin;
    }
  }
}

bool same_value(Value a, Value b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b) || a == b;
}

std::string tensor_json(const DataTensor& z) {
  nlohmann::json j;
  j["shape"] = z.shape().extents();
  j["channels"] = z.channels();
  j["values"] = std::vector<double>(z.values().begin(), z.values().end());
  return j.dump();
}

}  // namespace

// ---- features ---------------------------------------------------------------

int cmd_features(const FeaturesOptions& opts, std::ostream& out) {
  const SemiringTag tag = parse_semiring(opts.semiring);
  if (opts.reduce != "none" && opts.reduce != "sum") {
    throw ValidationError("--reduce must be none or sum");
  }
  const DataTensor z = load_tensor(opts.input);

  std::vector<CornerTree> trees;
  if (opts.trees_path) {
    trees = load_trees(*opts.trees_path, z.channels());
  } else {
    const TreeFamily family = parse_family(opts.family);
    SplitMix64 seeds(opts.seed);
    for (std::size_t t = 0; t < opts.count; ++t) {
      trees.push_back(generate(family, opts.nodes, z.shape().order(), z.channels(), seeds.next()));
    }
  }
  if (trees.empty()) throw ValidationError("no trees to evaluate");

  if (opts.reduce == "sum") {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& tree : trees) values.push_back(value_json(cts(tree, z, tag)));
    emit(opts.out, nlohmann::json{{"cts", values}}.dump() + "\n", out);
    return kOk;
  }

  if (!opts.out) throw ValidationError("--reduce none needs --out");
  const std::filesystem::path base(*opts.out);
  const FileFormat format = format_from_path(base);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto path = trees.size() == 1 ? base : indexed_path(base, t);
    save_field(ctps(trees[t], z, tag), path, format);
  }
  return kOk;
}

// ---- verify -----------------------------------------------------------------

VerifySummary run_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  const SemiringTag tag = parse_semiring(opts.semiring);
  if (opts.max_nodes == 0 || opts.max_extent == 0 || opts.order == 0) {
    throw ValidationError("--max-nodes, --max-extent and --order must be positive");
  }
  constexpr TreeFamily kFamilies[] = {TreeFamily::Random, TreeFamily::Linear, TreeFamily::LinearNE};

  SplitMix64 rng(opts.seed);
  VerifySummary summary;
  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    const TreeFamily family = kFamilies[trial % 3];
    const std::size_t nodes = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(opts.max_nodes)));
    const std::size_t channels = static_cast<std::size_t>(rng.range(1, 3));
    std::vector<std::size_t> extents(opts.order);
    for (auto& e : extents) e = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(opts.max_extent)));

    CornerTree tree = generate(family, nodes, opts.order, channels, rng.next());
    for (auto& v : tree.vertices) v.function = integer_node(rng, channels);
    DataTensor z(GridShape(extents), channels);
    for (double& x : z.values()) x = static_cast<double>(rng.range(-3, 3));

    Value expected;
    try {
      expected = cts_bruteforce(tree, z, tag, opts.cap);
    } catch (const CapExceededError& e) {
      err << "warning: trial " << trial << " skipped: " << e.what() << '\n';
      ++summary.skipped;
      continue;
    }
    ScalarField field = ctps(tree, z, tag);
    if (opts.corrupt_ctps) field[0] = sadd(tag, field_reduce(field), sone(tag)) + 1.0;
    const Value got = field_reduce(field);

    if (same_value(got, expected)) {
      ++summary.passed;
      continue;
    }
    if (summary.failed == 0) {
      out << "counterexample at trial " << trial << ": engine " << format_value(got)
          << ", brute force " << format_value(expected) << '\n'
          << "tree: " << to_json(tree, -1) << '\n'
          << "tensor: " << tensor_json(z) << '\n';
    }
    ++summary.failed;
  }
  return summary;
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  const VerifySummary s = run_verify(opts, out, err);
  const std::size_t checked = s.passed + s.failed;
  out << s.passed << "/" << checked << (s.failed == 0 ? " ok" : " passed");
  if (s.skipped) out << " (" << s.skipped << " skipped over the enumeration cap)";
  out << '\n';
  return s.failed == 0 ? kOk : kCounterexample;
}

// ---- bench ------------------------------------------------------------------

std::vector<BenchRow> run_bench(const BenchOptions& opts) {
#if defined(__GLIBC__)
  // Keep freed grid buffers in the heap between repeats; otherwise every call
  // re-faults its pages from the OS and the timings mostly measure that.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const SemiringTag tag = parse_semiring(opts.semiring);
  const TreeFamily family = parse_family(opts.family);
  if (opts.repeats == 0) throw ValidationError("--repeats must be positive");
  const CornerTree tree = generate(family, opts.nodes, 2, opts.channels, opts.seed);

  struct Case {
    DataTensor z;
    std::size_t calls = 1;  // cts calls per timed sample
    std::size_t peak = 0;
    std::vector<double> times;
  };
  std::vector<Case> cases;
  volatile double sink = 0.0;
  for (std::size_t size : opts.sizes) {
    SplitMix64 rng(opts.seed ^ size);
    Case c{DataTensor(GridShape{size, size}, opts.channels), 1, 0, {}};
    for (double& x : c.z.values()) x = rng.uniform(-1.0, 1.0);
    // Warm-up call, which also fixes how many calls make a sample of at
    // least kMinSample so that timer and scheduler jitter stay small.
    const std::size_t before = memory::live_bytes();
    memory::reset_peak();
    const auto t0 = std::chrono::steady_clock::now();
    sink = sink + cts(tree, c.z, tag);
    const double once = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.peak = memory::peak_bytes() - before;
    constexpr double kMinSample = 0.01;
    c.calls = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kMinSample / std::max(once, 1e-9))));
    cases.push_back(std::move(c));
  }
  // Sizes take turns so slow drift in machine load affects all of them alike.
  for (std::size_t r = 0; r < opts.repeats; ++r) {
    for (Case& c : cases) {
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t k = 0; k < c.calls; ++k) sink = sink + cts(tree, c.z, tag);
      const auto t1 = std::chrono::steady_clock::now();
      c.times.push_back(std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(c.calls));
    }
  }

  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto& times = cases[i].times;
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    const double median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    rows.push_back({opts.sizes[i], median, rows.empty() ? 0.0 : median / rows.back().median_seconds,
                    cases[i].peak});
  }
  return rows;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out) {
  const auto rows = run_bench(opts);
  out << "size,median_seconds,ratio,peak_bytes\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.4g,%zu\n", row.size, row.median_seconds, row.ratio,
                  row.peak_bytes);
    out << buf;
  }
  return kOk;
}

// ---- gen-tree ---------------------------------------------------------------

int cmd_gen_tree(const GenTreeOptions& opts, std::ostream& out) {
  const CornerTree tree =
      generate(parse_family(opts.family), opts.nodes, opts.order, opts.channels, opts.seed);
  emit(opts.out, to_json(tree) + "\n", out);
  return kOk;
}

// ---- demo-train ---------------------------------------------------------------

int cmd_demo_train(const DemoOptions& opts, std::ostream& out) {
  DemoConfig config;
  config.epochs = opts.epochs;
  config.seed = opts.seed;
  config.tag = parse_semiring(opts.semiring);
  config.n_trees = opts.trees;
  config.nodes = opts.nodes;
  config.learning_rate = opts.learning_rate;
  config.samples = opts.samples;
  std::ostringstream log;
  demo_train(config, log);
  emit(opts.out, log.str(), out);
  return kOk;
}

// ---- argv -------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fisum: corner-tree iterated sums of tensors"};
  app.require_subcommand(1);

  FeaturesOptions features;
  auto* f = app.add_subcommand("features", "CTPS fields or CTS values of an image or tensor");
  f->add_option("input", features.input, "input .npy, .png or .csv")->required();
  f->add_option("--trees", features.trees_path, "tree JSON, array of trees or layer checkpoint");
  f->add_option("--family", features.family, "family for generated trees");
  f->add_option("--nodes", features.nodes, "nodes per generated tree");
  f->add_option("--count", features.count, "number of generated trees");
  f->add_option("--seed", features.seed, "seed for generated trees");
  f->add_option("--semiring", features.semiring, "real or max-plus");
  f->add_option("--reduce", features.reduce, "none (fields) or sum (CTS values)");
  f->add_option("--out", features.out, "output path (.npy, .csv or .json)");

  VerifyOptions verify;
  auto* v = app.add_subcommand("verify", "compare the linear-time engine with brute force");
  v->add_option("--trials", verify.trials);
  v->add_option("--max-nodes", verify.max_nodes);
  v->add_option("--max-extent", verify.max_extent);
  v->add_option("--order", verify.order);
  v->add_option("--semiring", verify.semiring);
  v->add_option("--seed", verify.seed);
  v->add_option("--cap", verify.cap, "brute-force enumeration cap");
  v->add_flag("--corrupt-ctps", verify.corrupt_ctps)->group("");

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "time cts on square grids");
  b->add_option("--sizes", bench.sizes)->delimiter(',');
  b->add_option("--nodes", bench.nodes);
  b->add_option("--semiring", bench.semiring);
  b->add_option("--family", bench.family);
  b->add_option("--repeats", bench.repeats);
  b->add_option("--channels", bench.channels);
  b->add_option("--seed", bench.seed);

  GenTreeOptions gen;
  auto* g = app.add_subcommand("gen-tree", "write a generated corner tree as JSON");
  g->add_option("--family", gen.family);
  g->add_option("--nodes", gen.nodes);
  g->add_option("--order", gen.order);
  g->add_option("--channels", gen.channels);
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out);

  DemoOptions demo;
  auto* d = app.add_subcommand("demo-train", "train a FIS layer on synthetic textures");
  d->add_option("--epochs", demo.epochs);
  d->add_option("--seed", demo.seed);
  d->add_option("--semiring", demo.semiring);
  d->add_option("--trees", demo.trees);
  d->add_option("--nodes", demo.nodes);
  d->add_option("--lr", demo.learning_rate);
  d->add_option("--samples", demo.samples);
  d->add_option("--out", demo.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (f->parsed()) return cmd_features(features, out);
    if (v->parsed()) return cmd_verify(verify, out, err);
    if (b->parsed()) return cmd_bench(bench, out);
    if (g->parsed()) return cmd_gen_tree(gen, out);
    if (d->parsed()) return cmd_demo_train(demo, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kValidation;
}

}  // namespace fisum::cli
