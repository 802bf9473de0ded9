// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   test_util.hpp
 * @brief  Shared oracles for the test suites: naive reference loops and a
 *         central finite-difference gradient checker.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hallmark/hallmark.hpp"

namespace hallmark::testing {

using Matrix = std::vector<std::vector<double>>;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64 &rng, double scale = 1.0,
                                    bool requires_grad = false) {
  std::vector<double> v(numel_of(shape));
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto &x : v) x = d(rng);
  return Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

inline Matrix to_matrix(const Tensor<double> &t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t r = 0; r < t.dim(0); ++r)
    for (std::size_t c = 0; c < t.dim(1); ++c) m[r][c] = t.at(r, c);
  return m;
}

inline Matrix naive_matmul(const Matrix &a, const Matrix &b) {
  Matrix out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

/// Three-loop softmax(Q K^T / sqrt(d) + mask) V with masked keys skipped.
inline Matrix naive_attention(const Matrix &q, const Matrix &k, const Matrix &v,
                              const std::vector<std::uint8_t> &mask, Matrix *weights = nullptr) {
  const std::size_t n = q.size(), d = q[0].size();
  Matrix out(n, std::vector<double>(v[0].size(), 0.0));
  if (weights) weights->assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n, -INFINITY);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += q[i][t] * k[j][t];
      s[j] = dot / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += mask[j] ? std::exp(s[j] - mx) : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = mask[j] ? std::exp(s[j] - mx) / z : 0.0;
      if (weights) (*weights)[i][j] = w;
      for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w * v[j][c];
    }
  }
  return out;
}

inline double max_abs_diff(const Matrix &a, const Matrix &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

struct GradCheck {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

/// Relative error with an absolute floor so entries whose true gradient is
/// essentially zero do not divide by rounding noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/**
 * Compares autodiff gradients of `loss()` against central differences
 * (step h) for every entry of every tensor in `params`.
 */
inline GradCheck check_gradients(std::vector<std::pair<std::string, Tensor<double>>> params,
                                 const std::function<Tensor<double>()> &loss, double h = 1e-5) {
  for (auto &[name, p] : params) p.zero_grad();
  backward(loss());
  GradCheck out;
  for (auto &[name, p] : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto data = p.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      double plus, minus;
      {
        NoGradGuard g;
        data[i] = orig + h;
        plus = loss().item();
        data[i] = orig - h;
        minus = loss().item();
      }
      data[i] = orig;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.where = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

/// Tiny configuration used by gradient and oracle tests.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.ff = 16;
  c.vocab_size = 20;
  c.max_len = 6;
  c.dropout = 0.0;
  return c;
}

/// Random weights with non-trivial norms and biases, so every parameter
/// carries gradient signal.
inline EncoderWeights<double> random_weights(const ModelConfig &c, std::uint64_t seed,
                                             double scale = 0.5) {
  std::mt19937_64 rng(seed);
  auto w = init_weights<double>(c, rng);
  for (auto &[name, t] : w.named(c)) {
    if (name == "embeddings.position") continue;
    auto d = t.data();
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto &x : d) x = name.find("gamma") != std::string::npos ? 1.0 + u(rng) : u(rng);
  }
  return w;
}

/// A few seconds of float training on a synthetic corpus: enough to move
/// every weight and fill the optimizer moments.
struct TinyRun {
  SyntheticCorpus corpus;
  SplitSet split;
  Vocab vocab;
  TrainOptions options;
  std::vector<Example> train, validation, test;

  explicit TinyRun(std::size_t n_records = 60, std::size_t epochs = 2, std::uint64_t seed = 1)
      : corpus(generate_synthetic(n_records, n_hallmarks, SyntheticSpec{}, seed)),
        split(hallmark::split(corpus.records, SplitProportions{}, seed)) {
    std::vector<std::string> texts;
    for (const auto &r : split.train) texts.push_back(r.text);
    vocab = build_vocab(texts, 200, Casing::uncased);
    auto &m = options.model;
    m.layers = 1;
    m.hidden = 16;
    m.heads = 2;
    m.ff = 32;
    m.max_len = 32;
    m.vocab_size = vocab.size();
    options.init = InitScheme::scaled;
    options.max_lr = 3e-3;
    options.batch_size = 4;
    options.epochs = epochs;
    train = prepare(split.train, vocab, m.max_len);
    validation = prepare(split.validation, vocab, m.max_len);
    test = prepare(split.test, vocab, m.max_len);
  }
};

template <typename T> std::vector<T> flat_values(const EncoderWeights<T> &w, const ModelConfig &c) {
  std::vector<T> out;
  for (const auto &[n, t] : w.named(c)) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("hallmark_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace hallmark::testing
