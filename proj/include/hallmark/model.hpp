// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   model.hpp
 * @brief  BERT-style encoder: token + positional embeddings, post-norm
 *         transformer blocks, and a [CLS]-pooled multi-label head.
 *
 * Layout is token-by-feature: a sequence of n tokens is an [n x H] matrix
 * and projections are right-multiplied (Q = X * W_q). Per-head weight
 * matrices are the column blocks of the full [H x H] projections.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/tensor.hpp"
#include "hallmark/tokenizer.hpp"

namespace hallmark {

enum class PositionalMode { sinusoidal, learned };
enum class Activation { gelu, relu };
/// multi_label: one sigmoid per hallmark. binary: one 2-way softmax per
/// hallmark (ten independent binary classifiers over a shared encoder).
enum class InitScheme { scaled, bert };

enum class HeadMode { multi_label, binary };

inline constexpr double mask_fill = -1e9;

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ff = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 128;
  std::size_t n_labels = 10;
  double dropout = 0.1;
  double ln_eps = 1e-12;
  PositionalMode positional = PositionalMode::sinusoidal;
  Activation activation = Activation::gelu;
  HeadMode head = HeadMode::multi_label;

  std::size_t head_dim() const { return hidden / heads; }
  std::size_t head_outputs() const {
    return head == HeadMode::binary ? 2 * n_labels : n_labels;
  }

  void validate() const {
    auto fail = [](const std::string &m) { throw ConfigError("model config: " + m); };
    if (layers < 1) fail("layers must be >= 1");
    if (hidden < 1 || heads < 1) fail("hidden and heads must be positive");
    if (hidden % heads != 0)
      fail("hidden " + std::to_string(hidden) + " not divisible by heads " +
           std::to_string(heads));
    if (ff < 1) fail("ff must be positive");
    if (vocab_size < Vocab::num_special) fail("vocab_size must cover the special tokens");
    if (max_len < 3) fail("max_len must be >= 3");
    if (n_labels < 1) fail("n_labels must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
    if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
    if (positional == PositionalMode::sinusoidal && hidden % 2 != 0)
      fail("sinusoidal positions need an even hidden size");
  }

  /// Small configuration used for CPU runs.
  static ModelConfig desk(std::size_t vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
  }

  /// BERT-base dimensions: 12 layers, hidden 768, 12 heads, 512 tokens.
  static ModelConfig paper(std::size_t vocab_size) {
    ModelConfig c;
    c.layers = 12;
    c.hidden = 768;
    c.heads = 12;
    c.ff = 4 * 768;
    c.max_len = 512;
    c.vocab_size = vocab_size;
    return c;
  }

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Closed-form trainable parameter count.
inline std::size_t parameter_count(const ModelConfig &c) {
  const std::size_t H = c.hidden;
  std::size_t n = c.vocab_size * H;
  if (c.positional == PositionalMode::learned) n += c.max_len * H;
  const std::size_t per_layer = 4 * H * H      // W_q, W_k, W_v, W_o
                                + 2 * 2 * H    // two norms
                                + H * c.ff + c.ff + c.ff * H + H;
  n += c.layers * per_layer;
  n += H * c.head_outputs() + c.head_outputs();
  return n;
}

/// Sinusoidal encoding of one position: sin on even entries, cos on odd.
inline std::vector<double> positional_encoding(std::size_t pos, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even positive d_model, got " +
                      std::to_string(d_model));
  }
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; i < d_model / 2; ++i) {
    const double angle =
        static_cast<double>(pos) /
        std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

template <typename T>
Tensor<T> sinusoidal_table(std::size_t max_len, std::size_t d_model) {
  std::vector<T> v;
  v.reserve(max_len * d_model);
  for (std::size_t p = 0; p < max_len; ++p)
    for (double x : positional_encoding(p, d_model)) v.push_back(static_cast<T>(x));
  return Tensor<T>({max_len, d_model}, std::move(v), false);
}

template <typename T> struct LayerWeights {
  Tensor<T> wq, wk, wv, wo;
  Tensor<T> ln1_gamma, ln1_beta;
  Tensor<T> ff_in_w, ff_in_b, ff_out_w, ff_out_b;
  Tensor<T> ln2_gamma, ln2_beta;
};

template <typename T> struct EncoderWeights {
  Tensor<T> token_embedding; ///< [vocab x H]
  Tensor<T> positional;      ///< [max_len x H]; constant when sinusoidal
  std::vector<LayerWeights<T>> layers;
  Tensor<T> head_w; ///< [H x head_outputs]
  Tensor<T> head_b; ///< [head_outputs]

  /// Every tensor that is persisted, in a fixed order. The sinusoidal
  /// table is derived from the config and therefore omitted.
  std::vector<std::pair<std::string, Tensor<T>>> named(const ModelConfig &c) const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("embeddings.token", token_embedding);
    if (c.positional == PositionalMode::learned)
      out.emplace_back("embeddings.position", positional);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto &l = layers[i];
      const std::string p = "layer." + std::to_string(i) + ".";
      out.emplace_back(p + "attention.query", l.wq);
      out.emplace_back(p + "attention.key", l.wk);
      out.emplace_back(p + "attention.value", l.wv);
      out.emplace_back(p + "attention.output", l.wo);
      out.emplace_back(p + "attention_norm.gamma", l.ln1_gamma);
      out.emplace_back(p + "attention_norm.beta", l.ln1_beta);
      out.emplace_back(p + "ffn.in.weight", l.ff_in_w);
      out.emplace_back(p + "ffn.in.bias", l.ff_in_b);
      out.emplace_back(p + "ffn.out.weight", l.ff_out_w);
      out.emplace_back(p + "ffn.out.bias", l.ff_out_b);
      out.emplace_back(p + "ffn_norm.gamma", l.ln2_gamma);
      out.emplace_back(p + "ffn_norm.beta", l.ln2_beta);
    }
    out.emplace_back("head.weight", head_w);
    out.emplace_back("head.bias", head_b);
    return out;
  }
};

/// Name -> expected shape for every persisted tensor of a config.
inline std::vector<std::pair<std::string, Shape>> expected_shapes(const ModelConfig &c) {
  const std::size_t H = c.hidden;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embeddings.token", Shape{c.vocab_size, H});
  if (c.positional == PositionalMode::learned)
    out.emplace_back("embeddings.position", Shape{c.max_len, H});
  for (std::size_t i = 0; i < c.layers; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    for (auto w : {"attention.query", "attention.key", "attention.value", "attention.output"})
      out.emplace_back(p + w, Shape{H, H});
    out.emplace_back(p + "attention_norm.gamma", Shape{H});
    out.emplace_back(p + "attention_norm.beta", Shape{H});
    out.emplace_back(p + "ffn.in.weight", Shape{H, c.ff});
    out.emplace_back(p + "ffn.in.bias", Shape{c.ff});
    out.emplace_back(p + "ffn.out.weight", Shape{c.ff, H});
    out.emplace_back(p + "ffn.out.bias", Shape{H});
    out.emplace_back(p + "ffn_norm.gamma", Shape{H});
    out.emplace_back(p + "ffn_norm.beta", Shape{H});
  }
  out.emplace_back("head.weight", Shape{H, c.head_outputs()});
  out.emplace_back("head.bias", Shape{c.head_outputs()});
  return out;
}

/**
 * Weight init. Biases start at zero and norm gains at one; the sinusoidal
 * table is constant. `bert` draws every matrix from normal(0, 0.02)
 * truncated at two sigma. `scaled` uses stddev 1/sqrt(fan_in) for
 * projections and unit-variance token (and learned position) rows, which
 * trains far faster from scratch at small widths.
 */
template <typename T>
EncoderWeights<T> init_weights(const ModelConfig &c, std::mt19937_64 &rng,
                               InitScheme scheme = InitScheme::bert) {
  c.validate();
  const bool bert = scheme == InitScheme::bert;
  auto normal = [&](Shape s, double stddev) {
    std::vector<T> v(numel_of(s));
    for (auto &x : v) x = static_cast<T>(stddev * truncated_normal(rng));
    return Tensor<T>(std::move(s), std::move(v), true);
  };
  auto matrix = [&](std::size_t rows, std::size_t cols) {
    return normal({rows, cols}, bert ? 0.02 : 1.0 / std::sqrt(static_cast<double>(rows)));
  };
  auto table = [&](std::size_t rows, std::size_t cols) {
    return normal({rows, cols}, bert ? 0.02 : 1.0);
  };
  auto zeros = [](Shape s) { return Tensor<T>::zeros(std::move(s), true); };
  auto ones = [](Shape s) { return Tensor<T>::full(std::move(s), T(1), true); };

  const std::size_t H = c.hidden;
  EncoderWeights<T> w;
  w.token_embedding = table(c.vocab_size, H);
  w.positional = c.positional == PositionalMode::learned ? table(c.max_len, H)
                                                         : sinusoidal_table<T>(c.max_len, H);
  for (std::size_t i = 0; i < c.layers; ++i) {
    LayerWeights<T> l;
    l.wq = matrix(H, H);
    l.wk = matrix(H, H);
    l.wv = matrix(H, H);
    l.wo = matrix(H, H);
    l.ln1_gamma = ones({H});
    l.ln1_beta = zeros({H});
    l.ff_in_w = matrix(H, c.ff);
    l.ff_in_b = zeros({c.ff});
    l.ff_out_w = matrix(c.ff, H);
    l.ff_out_b = zeros({H});
    l.ln2_gamma = ones({H});
    l.ln2_beta = zeros({H});
    w.layers.push_back(std::move(l));
  }
  w.head_w = matrix(H, c.head_outputs());
  w.head_b = zeros({c.head_outputs()});
  return w;
}

/// Training-mode switch plus the dropout stream it draws from.
struct ForwardContext {
  bool training = false;
  std::mt19937_64 *rng = nullptr;
};

namespace detail {

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T> &x, double rate, const ForwardContext &ctx) {
  if (!ctx.training || rate == 0.0) return x;
  if (!ctx.rng) throw ConfigError("training-mode forward pass needs a dropout RNG");
  return dropout(x, rate, *ctx.rng);
}

/// Additive key mask: 0 for real positions, mask_fill for padding.
template <typename T> Tensor<T> mask_bias(std::span<const std::uint8_t> mask) {
  std::vector<T> v(mask.size());
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    v[i] = mask[i] ? T(0) : static_cast<T>(mask_fill);
    any = any || mask[i];
  }
  if (!any) throw ShapeError("attention: every key position is masked");
  return Tensor<T>({mask.size()}, std::move(v), false);
}

} // namespace detail

template <typename T>
Tensor<T> embed(std::span<const std::size_t> ids, const EncoderWeights<T> &w,
                const ModelConfig &c, const ForwardContext &ctx = {}) {
  if (ids.size() > c.max_len) {
    throw ShapeError("sequence of " + std::to_string(ids.size()) +
                     " tokens exceeds max_len " + std::to_string(c.max_len));
  }
  for (auto id : ids) {
    if (id >= c.vocab_size) {
      throw DataError("token id " + std::to_string(id) +
                      " out of range for vocab_size " + std::to_string(c.vocab_size));
    }
  }
  auto tok = gather_rows(w.token_embedding, ids);
  auto pos = slice_rows(w.positional, 0, ids.size());
  return detail::maybe_dropout(add(tok, pos), c.dropout, ctx);
}

/// Row-softmax of Q K^T / sqrt(d_k) with masked key columns filled.
template <typename T>
Tensor<T> attention_weights(const Tensor<T> &q, const Tensor<T> &k,
                            std::span<const std::uint8_t> mask) {
  detail::require_rank(q.shape(), 2, "attention");
  detail::require_rank(k.shape(), 2, "attention");
  if (q.shape() != k.shape() || mask.size() != k.dim(0)) {
    throw ShapeError("attention: Q " + shape_str(q.shape()) + ", K " +
                     shape_str(k.shape()) + ", mask length " +
                     std::to_string(mask.size()));
  }
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
  auto scores = scale(matmul(q, transpose(k)), inv_sqrt_dk);
  return softmax(add_bias(scores, detail::mask_bias<T>(mask)), 1);
}

template <typename T>
Tensor<T> attention(const Tensor<T> &q, const Tensor<T> &k, const Tensor<T> &v,
                    std::span<const std::uint8_t> mask) {
  if (v.shape() != k.shape()) {
    throw ShapeError("attention: V " + shape_str(v.shape()) + " vs K " +
                     shape_str(k.shape()));
  }
  return matmul(attention_weights(q, k, mask), v);
}

/// Concat(head_1..head_A) * W_o, head_i = attention on column block i of
/// X*W_q, X*W_k, X*W_v.
template <typename T>
Tensor<T> multi_head(const Tensor<T> &x, const LayerWeights<T> &l, std::size_t heads,
                     std::span<const std::uint8_t> mask) {
  detail::require_rank(x.shape(), 2, "multi_head");
  const std::size_t H = x.dim(1);
  if (heads == 0 || H % heads != 0) {
    throw ShapeError("multi_head: hidden " + std::to_string(H) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t dk = H / heads;
  auto q = matmul(x, l.wq);
  auto k = matmul(x, l.wk);
  auto v = matmul(x, l.wv);
  if (heads == 1) return matmul(attention(q, k, v, mask), l.wo);
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    outs.push_back(attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk),
                             slice_cols(v, h * dk, dk), mask));
  }
  return matmul(concat_cols(outs), l.wo);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T> &x, const LayerWeights<T> &l, Activation act) {
  auto inner = add_bias(matmul(x, l.ff_in_w), l.ff_in_b);
  inner = act == Activation::gelu ? gelu(inner) : relu(inner);
  return add_bias(matmul(inner, l.ff_out_w), l.ff_out_b);
}

/// Post-norm block: Z1 = Norm(X + MHA(X)); Z2 = Norm(Z1 + FFN(Z1)).
template <typename T>
Tensor<T> encoder_block(const Tensor<T> &x, const LayerWeights<T> &l,
                        const ModelConfig &c, std::span<const std::uint8_t> mask,
                        const ForwardContext &ctx = {}) {
  const T eps = static_cast<T>(c.ln_eps);
  auto attn = detail::maybe_dropout(multi_head(x, l, c.heads, mask), c.dropout, ctx);
  auto z1 = layer_norm(add(x, attn), l.ln1_gamma, l.ln1_beta, eps);
  auto ffn = detail::maybe_dropout(feed_forward(z1, l, c.activation), c.dropout, ctx);
  return layer_norm(add(z1, ffn), l.ln2_gamma, l.ln2_beta, eps);
}

/// Contextual embeddings for every position, [len x H].
template <typename T>
Tensor<T> encode(std::span<const std::size_t> ids, std::span<const std::uint8_t> mask,
                 const EncoderWeights<T> &w, const ModelConfig &c,
                 const ForwardContext &ctx = {}) {
  if (ids.size() != mask.size()) {
    throw ShapeError("encode: " + std::to_string(ids.size()) + " ids but " +
                     std::to_string(mask.size()) + " mask entries");
  }
  auto h = embed(ids, w, c, ctx);
  for (const auto &layer : w.layers) h = encoder_block(h, layer, c, mask, ctx);
  return h;
}

template <typename T>
Tensor<T> encode(const TokenSequence &seq, const EncoderWeights<T> &w,
                 const ModelConfig &c, const ForwardContext &ctx = {}) {
  return encode<T>(seq.ids, seq.mask, w, c, ctx);
}

/// Head logits from the [CLS] row, shape [head_outputs].
template <typename T>
Tensor<T> head_logits(const Tensor<T> &hidden, const EncoderWeights<T> &w) {
  auto cls = slice_rows(hidden, 0, 1);
  auto logits = add_bias(matmul(cls, w.head_w), w.head_b);
  return reshape(logits, Shape{w.head_b.numel()});
}

/// Per-label probabilities in (0, 1), shape [n_labels].
template <typename T>
Tensor<T> classify(const Tensor<T> &hidden, const EncoderWeights<T> &w,
                   const ModelConfig &c) {
  auto logits = head_logits(hidden, w);
  if (c.head == HeadMode::multi_label) return sigmoid(logits);
  // (negative, positive) logit pairs; probability of the positive class.
  auto pairs = softmax(reshape(logits, Shape{c.n_labels, 2}), 1);
  return reshape(slice_cols(pairs, 1, 1), Shape{c.n_labels});
}

/// encode + classify for one tokenized sequence.
template <typename T>
Tensor<T> predict_probs(const TokenSequence &seq, const EncoderWeights<T> &w,
                        const ModelConfig &c, const ForwardContext &ctx = {}) {
  return classify(encode(seq, w, c, ctx), w, c);
}

} // namespace hallmark
