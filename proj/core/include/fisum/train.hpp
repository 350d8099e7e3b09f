#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fisum/corner_tree.hpp"
#include "fisum/fis.hpp"
#include "fisum/semiring.hpp"

namespace fisum {

/// Synthetic two-class textures from box-smoothed white noise: class 0
/// (even indices) is smoothed over a square window, class 1 only along the
/// last axis.
struct TextureDataset {
  Batch images;
  std::vector<int> labels;
};

TextureDataset make_textures(std::size_t samples, std::size_t height, std::size_t width,
                             std::uint64_t seed);

struct DemoConfig {
  std::size_t epochs = 30;
  std::uint64_t seed = 7;
  SemiringTag tag = SemiringTag::Real;
  std::size_t n_trees = 16;
  std::size_t nodes = 2;
  TreeFamily family = TreeFamily::Random;
  double learning_rate = 0.2;
  std::size_t samples = 500;
  std::size_t image_size = 16;
  std::size_t batch_size = 25;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  bool operator==(const EpochLog&) const = default;
};

/// Trains FIS layer -> global average pool -> affine softmax with plain
/// minibatch SGD on cross-entropy. Writes a JSON-lines log to `log` (a header
/// line, then one line per epoch with the full-dataset loss and accuracy after
/// that epoch) and returns the per-epoch records.
std::vector<EpochLog> demo_train(const DemoConfig& config, std::ostream& log);

}  // namespace fisum
