#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fisum/corner_tree.hpp"
#include "fisum/engine.hpp"
#include "fisum/grid.hpp"
#include "fisum/semiring.hpp"

namespace fisum {

/// Dense channels-first array, e.g. (B, N_T, H, W).
struct NdArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  NdArray() = default;
  explicit NdArray(std::vector<std::size_t> shape, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  /// Elements per (batch, channel) slice.
  std::size_t plane() const;
  std::span<double> slice(std::size_t b, std::size_t c);
  std::span<const double> slice(std::size_t b, std::size_t c) const;

  bool operator==(const NdArray&) const = default;
};

/// What replaces -inf entries of a max-plus output.
struct MaxPlusFloor {
  enum class Kind { FieldMin, Constant };
  Kind kind = Kind::FieldMin;
  double constant = 0.0;
  bool operator==(const MaxPlusFloor&) const = default;
};

struct FisLayerConfig {
  std::size_t n_trees = 1;
  std::size_t nodes_per_tree = 1;
  TreeFamily family = TreeFamily::Random;
  SemiringTag tag = SemiringTag::Real;
  std::size_t in_channels = 1;
  std::uint64_t seed = 0;
  MaxPlusFloor floor;
  bool bias = false;
  std::size_t order = 2;
  bool operator==(const FisLayerConfig&) const = default;
};

void validate(const FisLayerConfig& config);

/// A batch of equally shaped tensors.
using Batch = std::vector<DataTensor>;

/// Tensor-to-tensor layer: one corner tree per output channel, each node a
/// learnable linear projection of the input channels.
class FisLayer {
 public:
  /// Generates n_trees trees; tree t is seeded with the t-th draw of a
  /// splitmix64 stream seeded by config.seed.
  explicit FisLayer(FisLayerConfig config);
  FisLayer(FisLayerConfig config, std::vector<CornerTree> trees);

  const FisLayerConfig& config() const { return config_; }
  const std::vector<CornerTree>& trees() const { return trees_; }

  /// Flat parameter layout: tree-major, then vertex, then the d weights
  /// followed by the bias when enabled.
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);

  bool operator==(const FisLayer&) const = default;

 private:
  FisLayerConfig config_;
  std::vector<CornerTree> trees_;
};

/// Forward intermediates per (batch item, tree).
struct FisCache {
  std::vector<CtpsCache> ctps;  // index b * n_trees + t
};

/// Output (B, N_T, extents...). Max-plus -inf entries are floored per config.
NdArray fis_forward(const FisLayer& layer, const Batch& batch, FisCache* cache = nullptr);

struct FisGradients {
  Batch input;
  std::vector<double> weights;
};

/// Gradient of <fis_forward(layer, batch), cotangent> with respect to the batch
/// and the parameters. Uses `cache` if given, otherwise recomputes the forward
/// intermediates.
FisGradients fis_vjp(const FisLayer& layer, const Batch& batch, const NdArray& cotangent,
                     const FisCache* cache = nullptr);

/// Checkpoint: {"config": {...}, "trees": [tree json, ...]}.
std::string layer_to_json(const FisLayer& layer);
FisLayer layer_from_json(std::string_view text);

/// Channels-first (B, C, spatial...) to a batch of channels-last tensors.
Batch to_batch(const NdArray& x);
/// Inverse of to_batch.
NdArray from_batch(const Batch& batch);

// ---- FIS block ------------------------------------------------------------

enum class Pooling { Average, Max };

/// Per-channel standardization with batch statistics and an affine map.
struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;

  explicit BatchNorm(std::size_t channels) : gamma(channels, 1.0), beta(channels, 0.0) {}
};

NdArray batch_standardize(const NdArray& x, const BatchNorm& norm);
NdArray relu(NdArray x);

/// Pools (B, C, H, W) onto (B, C, out_h, out_w); bin k along an axis of
/// length L spans [floor(kL/out), floor((k+1)L/out)).
NdArray adaptive_pool(const NdArray& x, Pooling pooling, std::size_t out_h, std::size_t out_w);

struct FisBlock {
  FisLayer first;
  FisLayer second;
  BatchNorm norm1;
  BatchNorm norm2;
  Pooling pooling = Pooling::Average;
  std::size_t out_h = 1;
  std::size_t out_w = 1;

  FisBlock(FisLayer first, FisLayer second, Pooling pooling, std::size_t out_h, std::size_t out_w);
};

/// layer1 -> norm -> ReLU -> layer2 -> norm -> ReLU -> adaptive pool.
NdArray fis_block_forward(const FisBlock& block, const Batch& batch);

}  // namespace fisum
