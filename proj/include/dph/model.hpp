#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dph/dataset.hpp"
#include "dph/errors.hpp"
#include "dph/matrix.hpp"
#include "dph/rng.hpp"
#include "dph/serial.hpp"

namespace dph {

enum class Activation { relu };

struct ModelConfig {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int code_length = 0;
  int num_categories = 0;
  int num_attributes = 0;
  Activation hidden_activation = Activation::relu;

  bool operator==(const ModelConfig&) const = default;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.input_dim < 1) throw ConfigError("input_dim must be >= 1");
  for (int h : cfg.hidden_dims) {
    if (h < 1) throw ConfigError("hidden dims must be >= 1");
  }
  if (cfg.code_length < 1) throw ConfigError("code_length must be >= 1");
  if (cfg.num_categories < 1) throw ConfigError("num_categories must be >= 1");
  if (cfg.num_attributes < 1) throw ConfigError("num_attributes must be >= 1");
}

// One affine layer; W is (input dim) x (output dim).
struct LayerParams {
  Matrix W;
  std::vector<double> b;

  bool operator==(const LayerParams&) const = default;
};

// All learnable parameters: the hidden stack, the sigmoid code layer, and the
// two task heads (softmax over categories, per-attribute logistic).
struct ParamSet {
  std::vector<LayerParams> hidden;
  LayerParams code;
  LayerParams cls;
  LayerParams attr;

  bool operator==(const ParamSet&) const = default;
};

struct DphModel {
  ModelConfig config;
  ParamSet params;

  bool operator==(const DphModel&) const = default;
};

// Flat view over the parameter layers in their declared order. `preceding`
// marks the hidden stack, which stands in for a pretrained feature extractor
// and trains at a reduced learning rate.
struct LayerRef {
  LayerParams* layer;
  bool preceding;
};

inline std::vector<LayerRef> layers_of(ParamSet& params) {
  std::vector<LayerRef> out;
  out.reserve(params.hidden.size() + 3);
  for (auto& layer : params.hidden) out.push_back({&layer, true});
  out.push_back({&params.code, false});
  out.push_back({&params.cls, false});
  out.push_back({&params.attr, false});
  return out;
}

inline std::vector<LayerRef> layers_of(const ParamSet& params) {
  return layers_of(const_cast<ParamSet&>(params));
}

inline ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  out.hidden.reserve(params.hidden.size());
  for (const auto& layer : params.hidden) {
    out.hidden.push_back({Matrix(layer.W.rows, layer.W.cols),
                          std::vector<double>(layer.b.size(), 0.0)});
  }
  const auto zero_layer = [](const LayerParams& l) {
    return LayerParams{Matrix(l.W.rows, l.W.cols),
                       std::vector<double>(l.b.size(), 0.0)};
  };
  out.code = zero_layer(params.code);
  out.cls = zero_layer(params.cls);
  out.attr = zero_layer(params.attr);
  return out;
}

// Weights drawn uniformly in +-1/sqrt(fan_in), biases zero, in declared layer
// order so a seed pins the full parameter vector.
inline DphModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  DphModel model;
  model.config = cfg;

  std::vector<std::pair<int, int>> shapes;
  int prev = cfg.input_dim;
  for (int h : cfg.hidden_dims) {
    shapes.emplace_back(prev, h);
    prev = h;
  }
  shapes.emplace_back(prev, cfg.code_length);
  shapes.emplace_back(cfg.code_length, cfg.num_categories);
  shapes.emplace_back(cfg.code_length, cfg.num_attributes);

  Rng rng(seed);
  std::vector<LayerParams> layers;
  layers.reserve(shapes.size());
  for (const auto& [in, out] : shapes) {
    LayerParams layer{Matrix(in, out), std::vector<double>(out, 0.0)};
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : layer.W.data) w = rng.uniform(-s, s);
    layers.push_back(std::move(layer));
  }
  const std::size_t n_hidden = cfg.hidden_dims.size();
  model.params.hidden.assign(layers.begin(), layers.begin() + n_hidden);
  model.params.code = layers[n_hidden];
  model.params.cls = layers[n_hidden + 1];
  model.params.attr = layers[n_hidden + 2];
  return model;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double log_sum_exp(std::span<const double> xs) {
  double mx = xs[0];
  for (double x : xs) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

// Everything the loss terms and backward pass need from one pass through the
// network. Probabilities are kept alongside the logits; losses are always
// evaluated from the logits so saturated sigmoids cannot produce infinities.
struct ForwardActivations {
  std::vector<std::vector<double>> hidden_pre;
  std::vector<std::vector<double>> hidden_post;
  std::vector<double> code_pre;
  std::vector<double> binary_like;
  std::vector<double> class_logits;
  std::vector<double> class_probs;
  std::vector<double> attr_logits;
  std::vector<double> attr_probs;
};

namespace detail {

inline std::vector<double> affine(const LayerParams& layer,
                                  std::span<const double> x) {
  std::vector<double> out(layer.W.cols, 0.0);
  for (std::size_t i = 0; i < layer.W.rows; ++i) {
    const double xi = x[i];
    const double* row = &layer.W.data[i * layer.W.cols];
    for (std::size_t j = 0; j < layer.W.cols; ++j) out[j] += xi * row[j];
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += layer.b[j];
  return out;
}

} // namespace detail

inline ForwardActivations forward(const DphModel& model,
                                  std::span<const double> features) {
  const ModelConfig& cfg = model.config;
  if (features.size() != static_cast<std::size_t>(cfg.input_dim)) {
    throw ShapeError("forward: expected " + std::to_string(cfg.input_dim) +
                     " features, got " + std::to_string(features.size()));
  }

  ForwardActivations acts;
  std::span<const double> current = features;
  for (const LayerParams& layer : model.params.hidden) {
    std::vector<double> pre = detail::affine(layer, current);
    std::vector<double> post(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
      post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    }
    acts.hidden_pre.push_back(std::move(pre));
    acts.hidden_post.push_back(std::move(post));
    current = acts.hidden_post.back();
  }

  acts.code_pre = detail::affine(model.params.code, current);
  acts.binary_like.resize(acts.code_pre.size());
  for (std::size_t i = 0; i < acts.code_pre.size(); ++i) {
    acts.binary_like[i] = sigmoid(acts.code_pre[i]);
  }

  acts.class_logits = detail::affine(model.params.cls, acts.binary_like);
  acts.class_probs.resize(acts.class_logits.size());
  {
    double mx = acts.class_logits[0];
    for (double z : acts.class_logits) mx = std::max(mx, z);
    double sum = 0.0;
    for (std::size_t c = 0; c < acts.class_logits.size(); ++c) {
      acts.class_probs[c] = std::exp(acts.class_logits[c] - mx);
      sum += acts.class_probs[c];
    }
    for (double& p : acts.class_probs) p /= sum;
  }

  acts.attr_logits = detail::affine(model.params.attr, acts.binary_like);
  acts.attr_probs.resize(acts.attr_logits.size());
  for (std::size_t j = 0; j < acts.attr_logits.size(); ++j) {
    acts.attr_probs[j] = sigmoid(acts.attr_logits[j]);
  }
  return acts;
}

// Softmax cross-entropy for one sample; a missing category contributes
// exactly zero. Evaluated as logsumexp(z) - z_y, never via log of a stored
// probability.
inline double class_loss(const ForwardActivations& acts,
                         std::optional<int> category) {
  if (!category.has_value()) return 0.0;
  const int C = static_cast<int>(acts.class_logits.size());
  if (*category < 1 || *category > C) {
    throw LabelError("category " + std::to_string(*category) + " outside 1.." +
                     std::to_string(C));
  }
  return log_sum_exp(acts.class_logits) - acts.class_logits[*category - 1];
}

// Per-attribute cost weights: the negative/positive count ratio on the
// training pool.
struct AttributeWeights {
  std::vector<double> w;

  bool operator==(const AttributeWeights&) const = default;
};

// Cost-sensitive logistic loss per attribute. Present labels are weighted by
// w/(w+1), absent by 1/(w+1); a missing label contributes exactly zero.
inline std::vector<double> attr_loss(const ForwardActivations& acts,
                                     std::span<const std::uint8_t> attributes,
                                     const AttributeWeights& weights) {
  const std::size_t m = acts.attr_logits.size();
  if (attributes.size() != m || weights.w.size() != m) {
    throw ShapeError("attr_loss: label/weight length mismatch");
  }
  std::vector<double> losses(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint8_t a = attributes[j];
    if (a == kAttrMissing) continue;
    const double t = acts.attr_logits[j];
    const double wj = weights.w[j];
    if (a == kAttrPresent) {
      losses[j] = wj / (wj + 1.0) * softplus(-t); // -log p
    } else if (a == kAttrAbsent) {
      losses[j] = 1.0 / (wj + 1.0) * softplus(t); // -log(1-p)
    } else {
      throw LabelError("attribute value " + std::to_string(int(a)) +
                       " outside {0,1,2}");
    }
  }
  return losses;
}

// w_j = #negatives / #positives over samples where attribute j is labelled.
// Degenerate counts: no positives -> max(#neg, 1); no negatives ->
// 1/max(#pos, 1); nothing labelled -> 1. Keeps every weight finite and
// positive.
inline AttributeWeights compute_attr_weights(std::span<const Sample> pool) {
  if (pool.empty()) throw ConfigError("training pool is empty");
  const std::size_t m = pool.front().attributes.size();
  std::vector<std::size_t> pos(m, 0), neg(m, 0);
  for (const Sample& s : pool) {
    if (s.attributes.size() != m) {
      throw ShapeError("compute_attr_weights: inconsistent attribute count");
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (s.attributes[j] == kAttrPresent) ++pos[j];
      else if (s.attributes[j] == kAttrAbsent) ++neg[j];
    }
  }
  AttributeWeights out;
  out.w.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (pos[j] == 0 && neg[j] == 0) {
      out.w[j] = 1.0;
    } else if (pos[j] == 0) {
      out.w[j] = static_cast<double>(std::max<std::size_t>(neg[j], 1));
    } else if (neg[j] == 0) {
      out.w[j] = 1.0 / static_cast<double>(pos[j]);
    } else {
      out.w[j] = static_cast<double>(neg[j]) / static_cast<double>(pos[j]);
    }
  }
  return out;
}

// The joint mini-batch loss, term by term. cls_term and each attr_terms[j]
// are post-scaling: classification is averaged over samples that carry a
// category, each attribute term is averaged over samples that carry that
// label and multiplied by alpha. A term whose batch count is zero is zero.
struct LossBreakdown {
  double total = 0.0;
  double cls_term = 0.0;
  std::vector<double> attr_terms;
};

namespace detail {

// Single code path for loss evaluation and gradient accumulation: the batch
// loss is the by-product of the same pass backward uses, so the two can
// never drift apart. Pass grads == nullptr for loss only.
inline LossBreakdown accumulate_batch(const DphModel& model,
                                      std::span<const Sample> batch,
                                      const AttributeWeights& weights,
                                      double alpha, ParamSet* grads) {
  const ModelConfig& cfg = model.config;
  const std::size_t m = static_cast<std::size_t>(cfg.num_attributes);
  if (weights.w.size() != m) {
    throw ShapeError("batch loss: attribute weight length mismatch");
  }

  std::size_t n_cls = 0;
  std::vector<std::size_t> n_attr(m, 0);
  for (const Sample& s : batch) {
    if (s.attributes.size() != m) {
      throw ShapeError("batch loss: sample attribute count mismatch");
    }
    if (s.category.has_value()) ++n_cls;
    for (std::size_t j = 0; j < m; ++j) {
      if (s.attributes[j] != kAttrMissing) ++n_attr[j];
    }
  }

  double cls_sum = 0.0;
  std::vector<double> attr_sums(m, 0.0);

  const std::size_t k = static_cast<std::size_t>(cfg.code_length);
  std::vector<double> g_code(k);

  for (const Sample& s : batch) {
    const ForwardActivations acts = forward(model, s.features);
    cls_sum += class_loss(acts, s.category);
    const std::vector<double> a_losses = attr_loss(acts, s.attributes, weights);
    for (std::size_t j = 0; j < m; ++j) attr_sums[j] += a_losses[j];

    if (grads == nullptr) continue;
    std::fill(g_code.begin(), g_code.end(), 0.0);

    if (s.category.has_value()) {
      const std::size_t y = static_cast<std::size_t>(*s.category - 1);
      const double inv = 1.0 / static_cast<double>(n_cls);
      const Matrix& Wc = model.params.cls.W;
      Matrix& dWc = grads->cls.W;
      for (std::size_t c = 0; c < acts.class_probs.size(); ++c) {
        const double gz = (acts.class_probs[c] - (c == y ? 1.0 : 0.0)) * inv;
        grads->cls.b[c] += gz;
        for (std::size_t i = 0; i < k; ++i) {
          dWc(i, c) += acts.binary_like[i] * gz;
          g_code[i] += Wc(i, c) * gz;
        }
      }
    }

    if (alpha != 0.0) {
      const Matrix& Wa = model.params.attr.W;
      Matrix& dWa = grads->attr.W;
      for (std::size_t j = 0; j < m; ++j) {
        const std::uint8_t a = s.attributes[j];
        if (a == kAttrMissing) continue;
        const double wj = weights.w[j];
        const double p = acts.attr_probs[j];
        const double scale = alpha / static_cast<double>(n_attr[j]);
        const double gt = scale * (a == kAttrPresent
                                       ? wj / (wj + 1.0) * (p - 1.0)
                                       : 1.0 / (wj + 1.0) * p);
        grads->attr.b[j] += gt;
        for (std::size_t i = 0; i < k; ++i) {
          dWa(i, j) += acts.binary_like[i] * gt;
          g_code[i] += Wa(i, j) * gt;
        }
      }
    }

    // Through the sigmoid of the code layer, then down the hidden stack.
    std::vector<double> g_pre(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double u = acts.binary_like[i];
      g_pre[i] = g_code[i] * u * (1.0 - u);
    }
    std::span<const double> code_in =
        acts.hidden_post.empty() ? std::span<const double>(s.features)
                                 : std::span<const double>(acts.hidden_post.back());
    {
      const Matrix& W = model.params.code.W;
      Matrix& dW = grads->code.W;
      std::vector<double> g_below(W.rows, 0.0);
      for (std::size_t i = 0; i < W.rows; ++i) {
        const double xi = code_in[i];
        for (std::size_t o = 0; o < W.cols; ++o) {
          dW(i, o) += xi * g_pre[o];
          g_below[i] += W(i, o) * g_pre[o];
        }
      }
      for (std::size_t o = 0; o < W.cols; ++o) grads->code.b[o] += g_pre[o];
      g_pre = std::move(g_below);
    }
    for (std::size_t l = model.params.hidden.size(); l-- > 0;) {
      const LayerParams& layer = model.params.hidden[l];
      Matrix& dW = grads->hidden[l].W;
      std::span<const double> in =
          l == 0 ? std::span<const double>(s.features)
                 : std::span<const double>(acts.hidden_post[l - 1]);
      std::vector<double> g_relu(layer.W.cols);
      for (std::size_t o = 0; o < layer.W.cols; ++o) {
        g_relu[o] = acts.hidden_pre[l][o] > 0.0 ? g_pre[o] : 0.0;
        grads->hidden[l].b[o] += g_relu[o];
      }
      std::vector<double> g_below(layer.W.rows, 0.0);
      for (std::size_t i = 0; i < layer.W.rows; ++i) {
        const double xi = in[i];
        for (std::size_t o = 0; o < layer.W.cols; ++o) {
          dW(i, o) += xi * g_relu[o];
          g_below[i] += layer.W(i, o) * g_relu[o];
        }
      }
      g_pre = std::move(g_below);
    }
  }

  LossBreakdown loss;
  loss.cls_term = n_cls > 0 ? cls_sum / static_cast<double>(n_cls) : 0.0;
  loss.attr_terms.resize(m, 0.0);
  loss.total = loss.cls_term;
  for (std::size_t j = 0; j < m; ++j) {
    loss.attr_terms[j] =
        n_attr[j] > 0 ? alpha * attr_sums[j] / static_cast<double>(n_attr[j]) : 0.0;
    loss.total += loss.attr_terms[j];
  }
  return loss;
}

} // namespace detail

inline LossBreakdown batch_loss(const DphModel& model,
                                std::span<const Sample> batch,
                                const AttributeWeights& weights, double alpha) {
  if (batch.empty()) throw ConfigError("batch is empty");
  return detail::accumulate_batch(model, batch, weights, alpha, nullptr);
}

// Exact analytic gradient of batch_loss with respect to every parameter,
// including the per-term batch scaling and the cost weights. Samples missing
// a label contribute zero gradient through the corresponding head.
inline ParamSet backward(const DphModel& model, std::span<const Sample> batch,
                         const AttributeWeights& weights, double alpha) {
  if (batch.empty()) throw ConfigError("batch is empty");
  ParamSet grads = zeros_like(model.params);
  detail::accumulate_batch(model, batch, weights, alpha, &grads);
  return grads;
}

struct TrainConfig {
  double alpha = 0.1;
  int batch_size = 200;
  double learning_rate = 1e-2;
  // Applied to the hidden stack, mirroring the lower rate a pretrained
  // feature extractor would train at.
  double lr_multiplier_pretrained = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 30;
  std::uint64_t seed = 1;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
}

struct OptimizerState {
  ParamSet velocity;
};

inline OptimizerState make_optimizer_state(const DphModel& model) {
  return OptimizerState{zeros_like(model.params)};
}

// Momentum SGD with decoupled-from-nothing classic weight decay:
// v <- momentum*v - lr_eff*(g + weight_decay*theta); theta <- theta + v.
inline void sgd_step(DphModel& model, const ParamSet& grads,
                     OptimizerState& state, const TrainConfig& cfg) {
  const auto params = layers_of(model.params);
  const auto gs = layers_of(grads);
  const auto vs = layers_of(state.velocity);
  if (gs.size() != params.size() || vs.size() != params.size()) {
    throw ShapeError("sgd_step: parameter/gradient layout mismatch");
  }
  for (std::size_t l = 0; l < params.size(); ++l) {
    const double lr = cfg.learning_rate *
                      (params[l].preceding ? cfg.lr_multiplier_pretrained : 1.0);
    LayerParams& p = *params[l].layer;
    const LayerParams& g = *gs[l].layer;
    LayerParams& v = *vs[l].layer;
    if (g.W.size() != p.W.size() || g.b.size() != p.b.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < p.W.data.size(); ++i) {
      v.W.data[i] = cfg.momentum * v.W.data[i] -
                    lr * (g.W.data[i] + cfg.weight_decay * p.W.data[i]);
      p.W.data[i] += v.W.data[i];
    }
    for (std::size_t i = 0; i < p.b.size(); ++i) {
      v.b[i] = cfg.momentum * v.b[i] -
               lr * (g.b[i] + cfg.weight_decay * p.b[i]);
      p.b[i] += v.b[i];
    }
  }
}

struct EpochStats {
  int epoch = 0;
  double total = 0.0;
  double cls_term = 0.0;
  std::vector<double> attr_terms;
};

struct TrainingLog {
  AblationMode mode = AblationMode::all;
  std::vector<EpochStats> epochs;
};

// Mini-batch SGD over the pool: reshuffle each epoch from one seeded stream,
// keep the final short batch, cost weights computed once up front. Each log
// row is the mean per-batch loss breakdown of its epoch.
inline TrainingLog train(DphModel& model, const std::vector<Sample>& pool,
                         AblationMode mode, const TrainConfig& cfg) {
  validate(cfg);
  if (pool.empty()) throw ConfigError("training pool is empty");
  for (const Sample& s : pool) {
    if (s.features.size() != static_cast<std::size_t>(model.config.input_dim)) {
      throw ShapeError("train: sample feature dim mismatch");
    }
  }

  const AttributeWeights weights = compute_attr_weights(pool);
  const std::size_t m = static_cast<std::size_t>(model.config.num_attributes);
  Rng rng(cfg.seed);
  OptimizerState state = make_optimizer_state(model);
  std::vector<Sample> working = pool;

  TrainingLog log;
  log.mode = mode;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(working);
    EpochStats stats;
    stats.epoch = epoch;
    stats.attr_terms.assign(m, 0.0);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < working.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len =
          std::min<std::size_t>(cfg.batch_size, working.size() - start);
      const std::span<const Sample> batch(&working[start], len);
      ParamSet grads = zeros_like(model.params);
      const LossBreakdown loss =
          detail::accumulate_batch(model, batch, weights, cfg.alpha, &grads);
      sgd_step(model, grads, state, cfg);
      stats.total += loss.total;
      stats.cls_term += loss.cls_term;
      for (std::size_t j = 0; j < m; ++j) stats.attr_terms[j] += loss.attr_terms[j];
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    stats.total *= inv;
    stats.cls_term *= inv;
    for (double& t : stats.attr_terms) t *= inv;
    log.epochs.push_back(std::move(stats));
  }
  return log;
}

inline void save_training_log_csv(const TrainingLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "epoch,total,cls";
  const std::size_t m = log.epochs.empty() ? 0 : log.epochs.front().attr_terms.size();
  for (std::size_t j = 0; j < m; ++j) out << ",attr_" << (j + 1);
  out << '\n';
  for (const EpochStats& e : log.epochs) {
    out << e.epoch << ',' << format_double(e.total) << ',' << format_double(e.cls_term);
    for (double t : e.attr_terms) out << ',' << format_double(t);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Checkpoint: one text header line with the architecture, then every
// parameter as little-endian 64-bit floats in declared layer order
// (each hidden layer W then b, code W b, class head W b, attribute head W b;
// matrices row-major).
inline void save_model(const DphModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "dph-model v1 d=" << model.config.input_dim << " hidden=";
  for (std::size_t i = 0; i < model.config.hidden_dims.size(); ++i) {
    out << (i ? "," : "") << model.config.hidden_dims[i];
  }
  out << " k=" << model.config.code_length << " C=" << model.config.num_categories
      << " m=" << model.config.num_attributes << "\n";
  for (const LayerRef& ref : layers_of(model.params)) {
    for (double w : ref.layer->W.data) write_f64_le(out, w);
    for (double b : ref.layer->b) write_f64_le(out, b);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline DphModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header line");
  const auto tokens = detail::split(detail::trim(line), ' ');
  if (tokens.size() != 7 || tokens[0] != "dph-model" || tokens[1] != "v1") {
    throw ParseError(path + ": bad header (expected 'dph-model v1 ...')");
  }
  const auto field = [&](std::string_view token, std::string_view key) {
    if (!token.starts_with(key)) {
      throw ParseError(path + ": expected '" + std::string(key) + "...', got '" +
                       std::string(token) + "'");
    }
    return token.substr(key.size());
  };
  ModelConfig cfg;
  cfg.input_dim = static_cast<int>(parse_u64(field(tokens[2], "d="), path));
  const std::string_view hidden = field(tokens[3], "hidden=");
  if (!hidden.empty()) {
    for (std::string_view part : detail::split(hidden, ',')) {
      cfg.hidden_dims.push_back(static_cast<int>(parse_u64(part, path)));
    }
  }
  cfg.code_length = static_cast<int>(parse_u64(field(tokens[4], "k="), path));
  cfg.num_categories = static_cast<int>(parse_u64(field(tokens[5], "C="), path));
  cfg.num_attributes = static_cast<int>(parse_u64(field(tokens[6], "m="), path));
  validate(cfg);

  DphModel model = init_model(cfg, 0);
  std::uint64_t offset = static_cast<std::uint64_t>(line.size()) + 1;
  for (const LayerRef& ref : layers_of(model.params)) {
    for (double& w : ref.layer->W.data) w = read_f64_le(in, offset);
    for (double& b : ref.layer->b) b = read_f64_le(in, offset);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path + ": trailing bytes after offset " + std::to_string(offset));
  }
  return model;
}

} // namespace dph
