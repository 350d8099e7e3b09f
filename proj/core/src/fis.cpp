#include "fisum/fis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>

#include "fisum/error.hpp"
#include "fisum/parallel.hpp"
#include "fisum/random.hpp"
#include "fisum/scan.hpp"
#include "tree_json.hpp"

namespace fisum {

// ---- NdArray --------------------------------------------------------------

NdArray::NdArray(std::vector<std::size_t> shape_in, double fill) : shape(std::move(shape_in)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  data.assign(n, fill);
}

std::size_t NdArray::plane() const {
  std::size_t n = 1;
  for (std::size_t k = 2; k < shape.size(); ++k) n *= shape[k];
  return n;
}

std::span<double> NdArray::slice(std::size_t b, std::size_t c) {
  const std::size_t p = plane();
  return {data.data() + (b * shape[1] + c) * p, p};
}

std::span<const double> NdArray::slice(std::size_t b, std::size_t c) const {
  const std::size_t p = plane();
  return {data.data() + (b * shape[1] + c) * p, p};
}

// ---- layer ----------------------------------------------------------------

void validate(const FisLayerConfig& config) {
  if (config.n_trees == 0) throw ValidationError("FIS layer needs at least one tree");
  if (config.nodes_per_tree == 0) throw ValidationError("FIS trees need at least one node");
  if (config.in_channels == 0) throw ValidationError("FIS layer needs at least one input channel");
  if (config.order == 0) throw ValidationError("FIS layer order must be at least 1");
  if (config.floor.kind == MaxPlusFloor::Kind::Constant && !std::isfinite(config.floor.constant)) {
    throw ValidationError("max-plus floor constant must be finite");
  }
}

FisLayer::FisLayer(FisLayerConfig config) : config_(config) {
  validate(config_);
  SplitMix64 seeds(config_.seed);
  trees_.reserve(config_.n_trees);
  for (std::size_t t = 0; t < config_.n_trees; ++t) {
    trees_.push_back(generate(config_.family, config_.nodes_per_tree, config_.order,
                              config_.in_channels, seeds.next(), config_.bias));
  }
}

FisLayer::FisLayer(FisLayerConfig config, std::vector<CornerTree> trees)
    : config_(config), trees_(std::move(trees)) {
  validate(config_);
  if (trees_.size() != config_.n_trees) {
    throw ValidationError("FIS layer expects " + std::to_string(config_.n_trees) + " trees, got " +
                          std::to_string(trees_.size()));
  }
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& tree = trees_[t];
    const std::string where = "tree " + std::to_string(t) + ": ";
    validate(tree, config_.in_channels);
    if (tree.order != config_.order) throw ValidationError(where + "order mismatch");
    if (tree.size() != config_.nodes_per_tree) throw ValidationError(where + "node count mismatch");
    for (const auto& v : tree.vertices) {
      const auto* lin = std::get_if<LinearProjection>(&v.function);
      if (!lin) throw ValidationError(where + "FIS nodes must be linear projections");
      if (lin->bias.has_value() != config_.bias) {
        throw ValidationError(where + "bias setting does not match the layer config");
      }
    }
  }
}

std::size_t FisLayer::parameter_count() const {
  return config_.n_trees * config_.nodes_per_tree * (config_.in_channels + (config_.bias ? 1 : 0));
}

std::vector<double> FisLayer::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& tree : trees_) {
    for (const auto& v : tree.vertices) {
      const auto& lin = std::get<LinearProjection>(v.function);
      out.insert(out.end(), lin.weights.begin(), lin.weights.end());
      if (lin.bias) out.push_back(*lin.bias);
    }
  }
  return out;
}

void FisLayer::set_parameters(std::span<const double> params) {
  if (params.size() != parameter_count()) {
    throw ValidationError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                          std::to_string(params.size()));
  }
  std::size_t k = 0;
  for (auto& tree : trees_) {
    for (auto& v : tree.vertices) {
      auto& lin = std::get<LinearProjection>(v.function);
      for (double& w : lin.weights) w = params[k++];
      if (lin.bias) *lin.bias = params[k++];
    }
  }
}

// ---- forward / vjp --------------------------------------------------------

namespace {

void check_batch(const FisLayer& layer, const Batch& batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const auto& config = layer.config();
  const GridShape& shape = batch.front().shape();
  if (shape.order() != config.order) {
    throw ValidationError("batch order " + std::to_string(shape.order()) +
                          " does not match layer order " + std::to_string(config.order));
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].channels() != config.in_channels) {
      throw ValidationError("batch item " + std::to_string(b) + " has " +
                            std::to_string(batch[b].channels()) + " channels, layer expects " +
                            std::to_string(config.in_channels));
    }
    if (!(batch[b].shape() == shape)) {
      throw ValidationError("batch item " + std::to_string(b) + " differs in shape");
    }
  }
}

std::vector<std::size_t> output_shape(const FisLayer& layer, const Batch& batch) {
  std::vector<std::size_t> shape{batch.size(), layer.config().n_trees};
  const auto& ext = batch.front().shape().extents();
  shape.insert(shape.end(), ext.begin(), ext.end());
  return shape;
}

/// Index of the first minimal finite entry, or npos if there is none.
std::size_t argmin_finite(std::span<const double> v) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i]) && (best == std::numeric_limits<std::size_t>::max() || v[i] < v[best])) {
      best = i;
    }
  }
  return best;
}

void write_output(const FisLayerConfig& config, const ScalarField& field, std::span<double> out) {
  std::copy(field.values().begin(), field.values().end(), out.begin());
  if (config.tag != SemiringTag::MaxPlus) return;
  double floor = config.floor.constant;
  if (config.floor.kind == MaxPlusFloor::Kind::FieldMin) {
    const std::size_t m = argmin_finite(out);
    floor = m == std::numeric_limits<std::size_t>::max() ? 0.0 : out[m];
  }
  for (double& v : out) {
    if (v == kNegInf) v = floor;
  }
}

/// Gradient contribution of one (item, tree) pair.
struct JobGradient {
  std::vector<double> input;    // points * channels, channels-last
  std::vector<double> weights;  // this tree's parameters
};

JobGradient tree_vjp(const FisLayerConfig& config, const CornerTree& tree, const DataTensor& z,
                     const CtpsCache& cache, std::span<const double> cotangent) {
  const GridShape& shape = z.shape();
  const std::size_t points = shape.size();
  const std::size_t d = z.channels();
  const std::size_t per_node = d + (config.bias ? 1 : 0);
  const bool maxplus = config.tag == SemiringTag::MaxPlus;

  JobGradient out{std::vector<double>(points * d, 0.0),
                  std::vector<double>(tree.size() * per_node, 0.0)};
  const auto children = tree.children();
  std::vector<std::vector<double>> grad_subtree(tree.size());
  grad_subtree[0].assign(cotangent.begin(), cotangent.end());

  if (maxplus) {
    const auto root = cache.subtree[0].values();
    auto& g = grad_subtree[0];
    if (config.floor.kind == MaxPlusFloor::Kind::FieldMin) {
      const std::size_t m = argmin_finite(root);
      if (m != std::numeric_limits<std::size_t>::max()) {
        for (std::size_t i = 0; i < points; ++i) {
          if (root[i] == kNegInf) g[m] += g[i];
        }
      }
    }
    for (std::size_t i = 0; i < points; ++i) {
      if (root[i] == kNegInf) g[i] = 0.0;
    }
  }

  std::vector<double> grad_node(points);
  // Parents precede children in the numbering, so a forward sweep sees every
  // vertex's full cotangent before visiting it.
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const auto& g = grad_subtree[v];
    const auto node = cache.node[v].values();
    const auto& ch = children[v];

    std::vector<ScalarField> scanned;
    scanned.reserve(ch.size());
    for (std::size_t c : ch) {
      scanned.push_back(cumsum_dir(config.tag, tree.vertices[c].direction, cache.subtree[c]));
    }

    if (maxplus) {
      const auto sv = cache.subtree[v].values();
      for (std::size_t i = 0; i < points; ++i) grad_node[i] = sv[i] == kNegInf ? 0.0 : g[i];
      for (std::size_t j = 0; j < ch.size(); ++j) {
        const std::size_t c = ch[j];
        grad_subtree[c] = maxplus_cumsum_vjp(tree.vertices[c].direction, shape,
                                             cache.subtree[c].values(), grad_node);
      }
    } else {
      // prefix[j] = node * C_0 * ... * C_{j-1}; suffix[j] = C_j * ... * C_{k-1}.
      const std::size_t k = ch.size();
      std::vector<std::vector<double>> prefix(k + 1, std::vector<double>(node.begin(), node.end()));
      std::vector<std::vector<double>> suffix(k + 1, std::vector<double>(points, 1.0));
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < points; ++i) prefix[j + 1][i] = prefix[j][i] * scanned[j][i];
      }
      for (std::size_t j = k; j-- > 0;) {
        for (std::size_t i = 0; i < points; ++i) suffix[j][i] = suffix[j + 1][i] * scanned[j][i];
      }
      for (std::size_t i = 0; i < points; ++i) grad_node[i] = g[i] * suffix[0][i];
      for (std::size_t j = 0; j < k; ++j) {
        ScalarField grad_scanned(shape, SemiringTag::Real);
        for (std::size_t i = 0; i < points; ++i) {
          grad_scanned[i] = g[i] * prefix[j][i] * suffix[j + 1][i];
        }
        const ScalarField back =
            cumsum_dir_vjp(SemiringTag::Real, tree.vertices[ch[j]].direction, grad_scanned);
        grad_subtree[ch[j]].assign(back.values().begin(), back.values().end());
      }
    }

    // The node value is w . z (+ b): route grad_node to weights and input.
    const auto& lin = std::get<LinearProjection>(tree.vertices[v].function);
    double* gw = out.weights.data() + v * per_node;
    for (std::size_t i = 0; i < points; ++i) {
      const double gn = grad_node[i];
      if (gn == 0.0) continue;
      const auto zi = z.at(i);
      double* gz = out.input.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) {
        gw[c] += gn * zi[c];
        gz[c] += gn * lin.weights[c];
      }
      if (config.bias) gw[d] += gn;
    }
    grad_subtree[v].clear();
    grad_subtree[v].shrink_to_fit();
  }
  return out;
}

}  // namespace

NdArray fis_forward(const FisLayer& layer, const Batch& batch, FisCache* cache) {
  check_batch(layer, batch);
  const auto& config = layer.config();
  NdArray out(output_shape(layer, batch));
  const std::size_t n_trees = config.n_trees;
  if (cache) cache->ctps.assign(batch.size() * n_trees, {});
  parallel_for(batch.size() * n_trees, [&](std::size_t job) {
    const std::size_t b = job / n_trees;
    const std::size_t t = job % n_trees;
    CtpsCache* slot = cache ? &cache->ctps[job] : nullptr;
    const ScalarField field = ctps(layer.trees()[t], batch[b], config.tag, slot);
    write_output(config, field, out.slice(b, t));
  });
  return out;
}

FisGradients fis_vjp(const FisLayer& layer, const Batch& batch, const NdArray& cotangent,
                     const FisCache* cache) {
  check_batch(layer, batch);
  const auto& config = layer.config();
  if (cotangent.shape != output_shape(layer, batch)) {
    throw ValidationError("cotangent shape does not match the layer output");
  }
  const std::size_t n_trees = config.n_trees;
  if (cache && cache->ctps.size() != batch.size() * n_trees) {
    throw ValidationError("forward cache does not match this batch");
  }

  std::vector<JobGradient> jobs(batch.size() * n_trees);
  parallel_for(jobs.size(), [&](std::size_t job) {
    const std::size_t b = job / n_trees;
    const std::size_t t = job % n_trees;
    CtpsCache local;
    const CtpsCache* slot = cache ? &cache->ctps[job] : nullptr;
    if (!slot) {
      ctps(layer.trees()[t], batch[b], config.tag, &local);
      slot = &local;
    }
    jobs[job] = tree_vjp(config, layer.trees()[t], batch[b], *slot, cotangent.slice(b, t));
  });

  // Fixed-order reduction keeps the result independent of the schedule.
  FisGradients grads;
  grads.weights.assign(layer.parameter_count(), 0.0);
  const std::size_t per_tree = layer.parameter_count() / n_trees;
  grads.input.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::vector<double> gin(batch[b].values().size(), 0.0);
    for (std::size_t t = 0; t < n_trees; ++t) {
      const auto& job = jobs[b * n_trees + t];
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += job.input[i];
    }
    DataTensor g(batch[b].shape(), batch[b].channels());
    std::copy(gin.begin(), gin.end(), g.values().begin());
    grads.input.push_back(std::move(g));
  }
  for (std::size_t t = 0; t < n_trees; ++t) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& w = jobs[b * n_trees + t].weights;
      for (std::size_t i = 0; i < per_tree; ++i) grads.weights[t * per_tree + i] += w[i];
    }
  }
  return grads;
}

// ---- checkpoints ----------------------------------------------------------

std::string layer_to_json(const FisLayer& layer) {
  const auto& c = layer.config();
  nlohmann::ordered_json config;
  config["n_trees"] = c.n_trees;
  config["nodes_per_tree"] = c.nodes_per_tree;
  config["family"] = std::string(to_string(c.family));
  config["semiring"] = std::string(to_string(c.tag));
  config["in_channels"] = c.in_channels;
  config["order"] = c.order;
  config["seed"] = c.seed;
  config["bias"] = c.bias;
  if (c.floor.kind == MaxPlusFloor::Kind::FieldMin) {
    config["maxplus_floor"] = "field-min";
  } else {
    config["maxplus_floor"] = {{"constant", c.floor.constant}};
  }
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : layer.trees()) trees.push_back(detail::tree_to_value(tree));
  nlohmann::ordered_json out;
  out["config"] = std::move(config);
  out["trees"] = std::move(trees);
  return out.dump(2);
}

FisLayer layer_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("layer json: ") + e.what());
  }
  try {
    const auto& c = j.at("config");
    FisLayerConfig config;
    config.n_trees = c.at("n_trees").get<std::size_t>();
    config.nodes_per_tree = c.at("nodes_per_tree").get<std::size_t>();
    config.family = parse_family(c.at("family").get<std::string>());
    config.tag = parse_semiring(c.at("semiring").get<std::string>());
    config.in_channels = c.at("in_channels").get<std::size_t>();
    config.order = c.value("order", std::size_t{2});
    config.seed = c.value("seed", std::uint64_t{0});
    config.bias = c.value("bias", false);
    const auto& floor = c.at("maxplus_floor");
    if (floor.is_string() && floor.get<std::string>() == "field-min") {
      config.floor = {MaxPlusFloor::Kind::FieldMin, 0.0};
    } else if (floor.is_object()) {
      config.floor = {MaxPlusFloor::Kind::Constant, floor.at("constant").get<double>()};
    } else {
      throw ValidationError("/config/maxplus_floor: expected \"field-min\" or {\"constant\": c}");
    }
    const auto& trees_json = j.at("trees");
    std::vector<CornerTree> trees;
    for (std::size_t t = 0; t < trees_json.size(); ++t) {
      trees.push_back(detail::tree_from_value(trees_json[t], "/trees/" + std::to_string(t)));
    }
    return FisLayer(config, std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("layer json: ") + e.what());
  }
}

// ---- layout helpers -------------------------------------------------------

Batch to_batch(const NdArray& x) {
  if (x.shape.size() < 3) throw ValidationError("expected (B, C, spatial...)");
  const std::size_t batch = x.shape[0];
  const std::size_t channels = x.shape[1];
  GridShape shape(std::vector<std::size_t>(x.shape.begin() + 2, x.shape.end()));
  Batch out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    DataTensor t(shape, channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const auto s = x.slice(b, c);
      for (std::size_t p = 0; p < s.size(); ++p) t(p, c) = s[p];
    }
    out.push_back(std::move(t));
  }
  return out;
}

NdArray from_batch(const Batch& batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  std::vector<std::size_t> shape{batch.size(), batch.front().channels()};
  const auto& ext = batch.front().shape().extents();
  shape.insert(shape.end(), ext.begin(), ext.end());
  NdArray out(shape);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t c = 0; c < shape[1]; ++c) {
      auto s = out.slice(b, c);
      for (std::size_t p = 0; p < s.size(); ++p) s[p] = batch[b](p, c);
    }
  }
  return out;
}

// ---- block ----------------------------------------------------------------

NdArray batch_standardize(const NdArray& x, const BatchNorm& norm) {
  const std::size_t batch = x.shape[0];
  const std::size_t channels = x.shape[1];
  if (norm.gamma.size() != channels || norm.beta.size() != channels) {
    throw ValidationError("normalization parameters do not match the channel count");
  }
  NdArray out = x;
  const double count = static_cast<double>(batch * x.plane());
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (double v : x.slice(b, c)) mean += v;
    }
    mean /= count;
    double var = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (double v : x.slice(b, c)) var += (v - mean) * (v - mean);
    }
    var /= count;
    const double scale = norm.gamma[c] / std::sqrt(var + norm.eps);
    for (std::size_t b = 0; b < batch; ++b) {
      for (double& v : out.slice(b, c)) v = (v - mean) * scale + norm.beta[c];
    }
  }
  return out;
}

NdArray relu(NdArray x) {
  for (double& v : x.data) v = std::max(v, 0.0);
  return x;
}

NdArray adaptive_pool(const NdArray& x, Pooling pooling, std::size_t out_h, std::size_t out_w) {
  if (x.shape.size() != 4) throw ValidationError("adaptive pooling expects (B, C, H, W)");
  const std::size_t h = x.shape[2];
  const std::size_t w = x.shape[3];
  if (out_h == 0 || out_w == 0 || out_h > h || out_w > w) {
    throw ValidationError("pooling grid " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                          " does not fit the " + std::to_string(h) + "x" + std::to_string(w) +
                          " input");
  }
  NdArray out({x.shape[0], x.shape[1], out_h, out_w});
  for (std::size_t b = 0; b < x.shape[0]; ++b) {
    for (std::size_t c = 0; c < x.shape[1]; ++c) {
      const auto in = x.slice(b, c);
      auto dst = out.slice(b, c);
      for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t r0 = i * h / out_h;
        const std::size_t r1 = (i + 1) * h / out_h;
        for (std::size_t j = 0; j < out_w; ++j) {
          const std::size_t c0 = j * w / out_w;
          const std::size_t c1 = (j + 1) * w / out_w;
          double acc = pooling == Pooling::Max ? -std::numeric_limits<double>::infinity() : 0.0;
          for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t q = c0; q < c1; ++q) {
              acc = pooling == Pooling::Max ? std::max(acc, in[r * w + q]) : acc + in[r * w + q];
            }
          }
          if (pooling == Pooling::Average) acc /= static_cast<double>((r1 - r0) * (c1 - c0));
          dst[i * out_w + j] = acc;
        }
      }
    }
  }
  return out;
}

FisBlock::FisBlock(FisLayer first_in, FisLayer second_in, Pooling pooling_in, std::size_t h,
                   std::size_t w)
    : first(std::move(first_in)),
      second(std::move(second_in)),
      norm1(first.config().n_trees),
      norm2(second.config().n_trees),
      pooling(pooling_in),
      out_h(h),
      out_w(w) {
  if (first.config().n_trees != second.config().in_channels) {
    throw ValidationError("block layer 2 expects " + std::to_string(second.config().in_channels) +
                          " channels but layer 1 yields " + std::to_string(first.config().n_trees));
  }
}

NdArray fis_block_forward(const FisBlock& block, const Batch& batch) {
  if (!batch.empty() && batch.front().shape().order() == 2) {
    const auto& shape = batch.front().shape();
    if (block.out_h > shape.extent(0) || block.out_w > shape.extent(1)) {
      throw ValidationError("pooling grid is larger than the input");
    }
  }
  NdArray x = relu(batch_standardize(fis_forward(block.first, batch), block.norm1));
  x = relu(batch_standardize(fis_forward(block.second, to_batch(x)), block.norm2));
  return adaptive_pool(x, block.pooling, block.out_h, block.out_w);
}

}  // namespace fisum
