#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fisum::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kValidation = 1, kCounterexample = 2 };

struct FeaturesOptions {
  std::string input;
  std::optional<std::string> trees_path;
  std::string family = "random";
  std::size_t nodes = 3;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string semiring = "real";
  std::string reduce = "none";
  std::optional<std::string> out;
};

struct VerifyOptions {
  std::size_t trials = 200;
  std::size_t max_nodes = 4;
  std::size_t max_extent = 5;
  std::size_t order = 2;
  std::string semiring = "real";
  std::uint64_t seed = 0;
  std::uint64_t cap = 100'000'000;
  /// Test hook: perturbs every engine field before comparing.
  bool corrupt_ctps = false;
};

struct VerifySummary {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
};

struct BenchOptions {
  std::vector<std::size_t> sizes{128, 256, 512};
  std::size_t nodes = 5;
  std::string semiring = "real";
  std::string family = "random";
  std::size_t repeats = 5;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t size = 0;
  /// Median over repeats of the mean time of one cts call.
  double median_seconds = 0.0;
  /// median / previous row's median; 0 for the first row.
  double ratio = 0.0;
  /// High-water mark of grid buffers during one cts call, input excluded.
  std::size_t peak_bytes = 0;
};

struct GenTreeOptions {
  std::string family = "random";
  std::size_t nodes = 3;
  std::size_t order = 2;
  std::size_t channels = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

struct DemoOptions {
  std::size_t epochs = 30;
  std::uint64_t seed = 7;
  std::string semiring = "real";
  std::size_t trees = 16;
  std::size_t nodes = 2;
  double learning_rate = 0.2;
  std::size_t samples = 500;
  std::optional<std::string> out;
};

int cmd_features(const FeaturesOptions& opts, std::ostream& out);

VerifySummary run_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);

std::vector<BenchRow> run_bench(const BenchOptions& opts);
int cmd_bench(const BenchOptions& opts, std::ostream& out);

int cmd_gen_tree(const GenTreeOptions& opts, std::ostream& out);

int cmd_demo_train(const DemoOptions& opts, std::ostream& out);

/// Parses argv and runs a subcommand; maps library errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fisum::cli
