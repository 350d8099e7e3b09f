#include "fisum/train.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "fisum/error.hpp"
#include "fisum/random.hpp"

namespace fisum {

namespace {

// Class 0: 3x3 box-smoothed noise. Class 1: noise smoothed by a 1x9 box
// along the last axis. Both have unit marginal variance.
constexpr std::size_t kIsoRadius = 1;
constexpr std::size_t kAnisoRadius = 4;

DataTensor smoothed_noise(SplitMix64& rng, std::size_t h, std::size_t w, std::size_t ry,
                          std::size_t rx) {
  const std::size_t nh = h + 2 * ry;
  const std::size_t nw = w + 2 * rx;
  std::vector<double> noise(nh * nw);
  for (double& v : noise) v = rng.normal();
  const double scale = 1.0 / std::sqrt(static_cast<double>((2 * ry + 1) * (2 * rx + 1)));
  std::vector<double> values(h * w, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a <= 2 * ry; ++a) {
        for (std::size_t b = 0; b <= 2 * rx; ++b) acc += noise[(i + a) * nw + j + b];
      }
      values[i * w + j] = acc * scale;
    }
  }
  return DataTensor(GridShape{h, w}, 1, std::move(values));
}

struct Classifier {
  std::size_t features = 0;
  std::vector<double> weights;  // 2 x features
  std::vector<double> bias;     // 2

  explicit Classifier(std::size_t n) : features(n), weights(2 * n, 0.0), bias(2, 0.0) {}
};

struct Pass {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Forward + optional SGD step on the items listed in `idx`.
Pass run_batch(FisLayer& layer, Classifier& clf, const TextureDataset& data,
               std::span<const std::size_t> idx, double lr, bool update) {
  Batch batch;
  batch.reserve(idx.size());
  for (std::size_t i : idx) batch.push_back(data.images[i]);

  FisCache cache;
  const NdArray out = fis_forward(layer, batch, update ? &cache : nullptr);
  const std::size_t n_trees = layer.config().n_trees;
  const double plane = static_cast<double>(out.plane());

  Pass pass;
  std::vector<double> features(n_trees);
  std::vector<double> grad_features(idx.size() * n_trees, 0.0);
  std::vector<double> grad_w(clf.weights.size(), 0.0);
  std::vector<double> grad_b(2, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(idx.size());

  for (std::size_t b = 0; b < idx.size(); ++b) {
    for (std::size_t t = 0; t < n_trees; ++t) {
      const auto s = out.slice(b, t);
      features[t] = std::accumulate(s.begin(), s.end(), 0.0) / plane;
    }
    double logits[2];
    for (std::size_t k = 0; k < 2; ++k) {
      logits[k] = clf.bias[k];
      for (std::size_t t = 0; t < n_trees; ++t) logits[k] += clf.weights[k * n_trees + t] * features[t];
    }
    const double m = std::max(logits[0], logits[1]);
    const double z = std::exp(logits[0] - m) + std::exp(logits[1] - m);
    const int label = data.labels[idx[b]];
    pass.loss += -(logits[label] - m - std::log(z));
    const int predicted = logits[1] > logits[0] ? 1 : 0;
    if (predicted == label) ++pass.correct;
    if (!update) continue;

    for (std::size_t k = 0; k < 2; ++k) {
      const double p = std::exp(logits[k] - m) / z;
      const double g = (p - (static_cast<int>(k) == label ? 1.0 : 0.0)) * inv_batch;
      grad_b[k] += g;
      for (std::size_t t = 0; t < n_trees; ++t) {
        grad_w[k * n_trees + t] += g * features[t];
        grad_features[b * n_trees + t] += g * clf.weights[k * n_trees + t];
      }
    }
  }
  if (!update) return pass;

  NdArray cot(out.shape);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    for (std::size_t t = 0; t < n_trees; ++t) {
      const double g = grad_features[b * n_trees + t] / plane;
      for (double& v : cot.slice(b, t)) v = g;
    }
  }
  const FisGradients grads = fis_vjp(layer, batch, cot, &cache);
  std::vector<double> params = layer.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads.weights[i];
  layer.set_parameters(params);
  for (std::size_t i = 0; i < clf.weights.size(); ++i) clf.weights[i] -= lr * grad_w[i];
  for (std::size_t k = 0; k < 2; ++k) clf.bias[k] -= lr * grad_b[k];
  return pass;
}

}  // namespace

TextureDataset make_textures(std::size_t samples, std::size_t height, std::size_t width,
                             std::uint64_t seed) {
  SplitMix64 rng(seed);
  TextureDataset data;
  data.images.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int label = static_cast<int>(i % 2);
    data.labels.push_back(label);
    data.images.push_back(label == 0
                              ? smoothed_noise(rng, height, width, kIsoRadius, kIsoRadius)
                              : smoothed_noise(rng, height, width, 0, kAnisoRadius));
  }
  return data;
}

std::vector<EpochLog> demo_train(const DemoConfig& config, std::ostream& log) {
  if (config.samples == 0 || config.batch_size == 0 || config.image_size == 0) {
    throw ValidationError("demo: samples, batch size and image size must be positive");
  }
  if (!std::isfinite(config.learning_rate)) throw ValidationError("demo: learning rate must be finite");

  SplitMix64 seeds(config.seed);
  const std::uint64_t data_seed = seeds.next();
  const std::uint64_t layer_seed = seeds.next();
  SplitMix64 shuffle_rng(seeds.next());

  const TextureDataset data =
      make_textures(config.samples, config.image_size, config.image_size, data_seed);
  FisLayerConfig layer_config;
  layer_config.n_trees = config.n_trees;
  layer_config.nodes_per_tree = config.nodes;
  layer_config.family = config.family;
  layer_config.tag = config.tag;
  layer_config.in_channels = 1;
  layer_config.seed = layer_seed;
  FisLayer layer(layer_config);
  Classifier clf(config.n_trees);

  nlohmann::ordered_json header;
  header["event"] = "start";
  header["seed"] = config.seed;
  header["semiring"] = std::string(to_string(config.tag));
  header["family"] = std::string(to_string(config.family));
  header["trees"] = config.n_trees;
  header["nodes"] = config.nodes;
  header["epochs"] = config.epochs;
  header["learning_rate"] = config.learning_rate;
  header["samples"] = config.samples;
  header["image_size"] = config.image_size;
  header["batch_size"] = config.batch_size;
  log << header.dump() << '\n';

  std::vector<std::size_t> order(config.samples);
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      run_batch(layer, clf, data, std::span(order).subspan(start, len), config.learning_rate, true);
    }

    // Full-dataset evaluation in index order, independent of the shuffle.
    Pass total;
    std::vector<std::size_t> all(config.samples);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t start = 0; start < all.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, all.size() - start);
      const Pass p = run_batch(layer, clf, data, std::span(all).subspan(start, len), 0.0, false);
      total.loss += p.loss;
      total.correct += p.correct;
    }
    EpochLog entry{epoch, total.loss / static_cast<double>(config.samples),
                   static_cast<double>(total.correct) / static_cast<double>(config.samples)};
    history.push_back(entry);
    nlohmann::ordered_json line;
    line["epoch"] = entry.epoch;
    line["loss"] = entry.loss;
    line["accuracy"] = entry.accuracy;
    log << line.dump() << '\n';
  }
  return history;
}

}  // namespace fisum
