// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "fisum/corner_tree.hpp"
#include "fisum/engine.hpp"
#include "fisum/fis.hpp"
#include "fisum/scan.hpp"
#include "fisum/train.hpp"
#include "gradcheck.hpp"
#include "oracle.hpp"

namespace fisum {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

constexpr SemiringTag kTags[] = {SemiringTag::Real, SemiringTag::MaxPlus};
constexpr TreeFamily kFamilies[] = {TreeFamily::Random, TreeFamily::Linear, TreeFamily::LinearNE};

// 1. cts == cts_bruteforce exactly for 200 trees per family, |V| <= 4,
//    p in {1,2,3}, grids up to 5x5(x4), integer inputs, both semirings.
Outcome oracle_equivalence() {
  SplitMix64 rng(2024);
  std::size_t trials = 0, mismatches = 0;
  std::uint64_t placements = 0;
  for (TreeFamily family : kFamilies) {
    for (int i = 0; i < 200; ++i) {
      const std::size_t order = 1 + static_cast<std::size_t>(i % 3);
      const std::size_t nodes = 1 + rng.below(4);
      const std::size_t channels = 1 + rng.below(2);
      CornerTree tree = generate(family, nodes, order, channels, rng.next());
      for (auto& v : tree.vertices) {
        for (double& w : std::get<LinearProjection>(v.function).weights) {
          w = static_cast<double>(rng.range(-2, 2));
        }
      }
      // Extents up to 5 (5 and 4 on the last axis at p=3); shrink until the
      // brute force stays below 2e6 placements.
      std::vector<std::size_t> ext(order);
      std::uint64_t count = 0;
      do {
        for (std::size_t k = 0; k < order; ++k) ext[k] = 1 + rng.below(order == 3 && k == 2 ? 4 : 5);
        std::uint64_t pts = 1;
        for (auto e : ext) pts *= e;
        count = 1;
        for (std::size_t v = 0; v < nodes; ++v) count *= pts;
      } while (count > 2'000'000);
      const DataTensor z = oracle::random_integer_tensor(rng, GridShape(ext), channels);
      for (SemiringTag tag : kTags) {
        ++trials;
        placements += count;
        if (cts(tree, z, tag) != cts_bruteforce(tree, z, tag)) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("%zu/%zu exact (3 families x 200 trees x 2 semirings, %llu placements)",
                               trials - mismatches, trials, static_cast<unsigned long long>(placements))};
}

// 2. Every sign pattern at p=2 and p=3 equals the brute-force double loop.
Outcome directional_scans() {
  SplitMix64 rng(7);
  std::size_t cases = 0, mismatches = 0, patterns = 0;
  auto run = [&](const GridShape& shape, const Direction& d) {
    for (SemiringTag tag : kTags) {
      ScalarField x(shape, tag);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = tag == SemiringTag::MaxPlus && rng.below(6) == 0 ? kNegInf
                                                               : static_cast<double>(rng.range(-3, 3));
      }
      const ScalarField got = cumsum_dir(tag, d, x);
      const auto expected = oracle::cumsum_bruteforce(tag, d, shape, x.values());
      ++cases;
      if (!std::equal(got.values().begin(), got.values().end(), expected.begin())) ++mismatches;
    }
  };
  for (const Direction& d : all_directions(2)) {
    ++patterns;
    for (std::size_t a = 1; a <= 5; ++a) {
      for (std::size_t b = 1; b <= 5; ++b) run(GridShape{a, b}, d);
    }
  }
  for (const Direction& d : all_directions(3)) {
    ++patterns;
    for (std::size_t a = 1; a <= 5; a += 2) {
      for (std::size_t b = 1; b <= 5; b += 2) {
        for (std::size_t c = 1; c <= 5; c += 2) run(GridShape{a, b, c}, d);
      }
    }
    run(GridShape{5, 4, 3}, d);
  }
  return {mismatches == 0 && patterns == 34,
          fmt("%zu patterns, %zu/%zu grids exact", patterns, cases - mismatches, cases)};
}

// 3. The root-with-SE-and-NW-children tree counts 321 patterns.
Outcome permutation_fixture() {
  CornerTree tree(2, Identity{0});
  tree.add_child(0, Direction::parse("SE"), Identity{0});
  tree.add_child(0, Direction::parse("NW"), Identity{0});
  const std::vector<int> perm{3, 5, 2, 4, 1};
  const double got = cts(tree, oracle::permutation_tensor(perm), SemiringTag::Real);
  const auto expected = static_cast<double>(oracle::count_321(perm));
  return {got == expected, fmt("[3 5 2 4 1]: cts = %g, triple enumeration = %g", got, expected)};
}

// 4. Chains of Monomial nodes on 1xT data equal the 1-D dynamic program.
Outcome one_dimensional_reduction() {
  SplitMix64 rng(11);
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t len = 1; len <= 64; ++len) {
    for (std::size_t k = 1; k <= 4; ++k) {
      std::vector<double> x(len);
      for (auto& v : x) v = static_cast<double>(rng.range(-2, 2));
      std::vector<unsigned> alpha(k);
      for (auto& a : alpha) a = 1 + static_cast<unsigned>(rng.below(3));
      const DataTensor line(GridShape{len}, 1, x);
      const DataTensor strip(GridShape{1, len}, 1, x);
      CornerTree chain1(1, Monomial{0, alpha[0]});
      CornerTree chain2(2, Monomial{0, alpha[0]});
      for (std::size_t i = 1; i < k; ++i) {
        chain1.add_child(i - 1, Direction::parse("+"), Monomial{0, alpha[i]});
        chain2.add_child(i - 1, Direction::parse("=+"), Monomial{0, alpha[i]});
      }
      for (SemiringTag tag : kTags) {
        const double expected = iterated_sum_1d(x, alpha, tag).back();
        cases += 2;
        if (cts(chain1, line, tag) != expected) ++mismatches;
        if (cts(chain2, strip, tag) != expected) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("T = 1..64, k = 1..4: %zu/%zu exact", cases - mismatches, cases)};
}

// 5. fis_vjp against central differences over 50 configurations per semiring.
Outcome gradient_correctness() {
  SplitMix64 rng(5);
  double worst[2] = {0, 0};
  std::size_t checked[2] = {0, 0}, skipped[2] = {0, 0};
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 50; ++i) {
      auto inst = gradcheck::random_instance(rng, kTags[s]);
      const auto r = gradcheck::check(inst.layer, inst.batch, inst.cotangent);
      worst[s] = std::max(worst[s], r.max_rel_error);
      checked[s] += r.checked;
      skipped[s] += r.skipped;
    }
  }
  // Kink coordinates are excluded for max-plus, but they must stay rare.
  const bool few_kinks = skipped[1] * 20 <= checked[1] + skipped[1];
  const bool pass = worst[0] <= 1e-6 && worst[1] <= 1e-6 && skipped[0] == 0 && few_kinks;
  return {pass, fmt("real max rel err %.2e over %zu coords; max-plus %.2e over %zu coords (%zu at kinks)",
                    worst[0], checked[0], worst[1], checked[1], skipped[1])};
}

// 6. Time ratios in [2.6, 5.4] per 4x pixels, memory at most 1.5x beyond
//    proportional, and t(n) <= 1.5 * n * t(1) for n = 1..8.
Outcome linear_complexity() {
  cli::BenchOptions opts;
  opts.sizes = {128, 256, 512};
  opts.repeats = 15;
  const auto rows = cli::run_bench(opts);
  bool pass = rows.size() == 3;
  std::string detail = "ratios";
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double mem_growth = (static_cast<double>(rows[i].peak_bytes) / rows[i - 1].peak_bytes) / 4.0;
    pass = pass && rows[i].ratio >= 2.6 && rows[i].ratio <= 5.4 && mem_growth <= 1.5;
    detail += fmt(" %.2f (mem x%.2f of proportional)", rows[i].ratio, mem_growth);
  }
  // Node sweep in interleaved rounds; per-n median over rounds.
  opts.sizes = {256};
  opts.repeats = 3;
  constexpr std::size_t kRounds = 5;
  std::vector<std::vector<double>> samples(9);
  for (std::size_t round = 0; round < kRounds; ++round) {
    for (std::size_t n = 1; n <= 8; ++n) {
      opts.nodes = n;
      samples[n].push_back(cli::run_bench(opts).front().median_seconds);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double t1 = median(samples[1]);
  double worst = 0.0;
  for (std::size_t n = 1; n <= 8; ++n) {
    worst = std::max(worst, median(samples[n]) / (static_cast<double>(n) * t1));
  }
  pass = pass && worst <= 1.5;
  detail += fmt("; max t(n)/(n t(1)) over n=1..8 at 256^2: %.2f", worst);
  return {pass, detail};
}

// 7. (B, C, H, W) -> (B, N_T, H, W) over random configurations.
Outcome shape_contract() {
  SplitMix64 rng(17);
  std::size_t ok = 0, total = 0, non_square = 0;
  for (int i = 0; i < 200; ++i) {
    FisLayerConfig config;
    config.n_trees = 1 + rng.below(6);
    config.nodes_per_tree = 1 + rng.below(4);
    config.in_channels = 1 + rng.below(4);
    config.family = kFamilies[rng.below(3)];
    config.tag = kTags[rng.below(2)];
    config.bias = rng.below(2) == 0;
    config.seed = rng.next();
    const std::size_t b = i % 5 == 0 ? 1 : 1 + rng.below(4);
    const std::size_t h = 1 + rng.below(10), w = 1 + rng.below(10);
    non_square += h != w;
    Batch batch;
    for (std::size_t j = 0; j < b; ++j) {
      batch.push_back(oracle::random_tensor(rng, GridShape{h, w}, config.in_channels));
    }
    const NdArray out = fis_forward(FisLayer(config), batch);
    ++total;
    const bool finite = std::all_of(out.data.begin(), out.data.end(), [](double v) { return std::isfinite(v); });
    if (out.shape == std::vector<std::size_t>{b, config.n_trees, h, w} && finite) ++ok;
  }
  return {ok == total, fmt("%zu/%zu configs (%zu with H != W)", ok, total, non_square)};
}

std::string demo_log(const DemoConfig& config) {
  std::ostringstream log;
  demo_train(config, log);
  return log.str();
}

// 8. Same seed twice: identical trees, weights, forward outputs, training logs.
Outcome determinism() {
  bool pass = true;
  for (TreeFamily family : kFamilies) {
    pass = pass && to_json(generate(family, 6, 2, 3, 99)) == to_json(generate(family, 6, 2, 3, 99));
  }
  SplitMix64 rng(3);
  Batch batch;
  for (int j = 0; j < 3; ++j) batch.push_back(oracle::random_tensor(rng, GridShape{9, 7}, 3));
  for (SemiringTag tag : kTags) {
    FisLayerConfig config;
    config.n_trees = 8;
    config.nodes_per_tree = 4;
    config.in_channels = 3;
    config.tag = tag;
    config.seed = 1234;
    const FisLayer a(config), b(config);
    pass = pass && a.parameters() == b.parameters();
    const NdArray fa = fis_forward(a, batch), fb = fis_forward(b, batch);
    pass = pass && std::memcmp(fa.data.data(), fb.data.data(), fa.size() * sizeof(double)) == 0;
  }
  DemoConfig demo;
  demo.epochs = 3;
  demo.samples = 100;
  const std::string first = demo_log(demo);
  // A second run under a different worker count must not change a bit.
  setenv("FISUM_THREADS", "1", 1);
  const std::string second = demo_log(demo);
  unsetenv("FISUM_THREADS");
  pass = pass && first == second;
  return {pass, "trees, weights, forward outputs (both semirings) and demo logs bit-identical"};
}

// 9. Default demo reaches >= 0.9 train accuracy within 30 epochs, < 3 min on
//    one core.
Outcome demo_training() {
  setenv("FISUM_THREADS", "1", 1);
  const auto start = Clock::now();
  std::ostringstream log;
  const auto epochs = demo_train(DemoConfig{}, log);
  const double elapsed = seconds_since(start);
  unsetenv("FISUM_THREADS");
  const double acc = epochs.empty() ? 0.0 : epochs.back().accuracy;
  return {acc >= 0.9 && epochs.size() == 30 && elapsed < 180.0,
          fmt("final accuracy %.3f after %zu epochs in %.1f s on 1 worker", acc, epochs.size(), elapsed)};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace fisum

int main() {
  using namespace fisum;
  const Criterion criteria[] = {
      {1, "oracle-equivalence", 120, oracle_equivalence},
      {2, "directional-scans", 0, directional_scans},
      {3, "permutation-321", 0, permutation_fixture},
      {4, "one-dimensional-reduction", 0, one_dimensional_reduction},
      {5, "gradient-correctness", 300, gradient_correctness},
      {6, "linear-complexity", 0, linear_complexity},
      {7, "shape-contract", 0, shape_contract},
      {8, "determinism", 0, determinism},
      {9, "demo-training", 180, demo_training},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    if (c.time_limit > 0 && elapsed >= c.time_limit) {
      outcome.pass = false;
      outcome.detail += fmt("; exceeded %.0f s", c.time_limit);
    }
    failures += !outcome.pass;
    std::printf("%s %d %-26s %7.2fs  %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, elapsed,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
