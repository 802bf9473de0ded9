// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   optim.hpp
 * @brief  Multi-label BCE loss, the one-cycle learning-rate/momentum
 *         schedule, and Adam with decoupled weight decay.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/tensor.hpp"

namespace hallmark {

inline constexpr double prob_clamp = 1e-7;

/**
 * Mean binary cross-entropy over a [batch x labels] probability matrix (a
 * rank-1 tensor is treated as a batch of one). Probabilities are clamped to
 * [1e-7, 1 - 1e-7]; clamped entries pass no gradient.
 */
template <typename T>
Tensor<T> bce_loss(const Tensor<T> &probs, std::span<const std::uint8_t> labels) {
  if (probs.numel() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(labels.size()) +
                     " labels for probabilities of shape " + shape_str(probs.shape()));
  }
  const T lo = static_cast<T>(prob_clamp);
  const T hi = T(1) - lo;
  const std::size_t n = probs.numel();
  auto p = probs.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), prob_clamp, 1.0 - prob_clamp);
    total -= labels[i] ? std::log(q) : std::log(1.0 - q);
  }
  const T loss = static_cast<T>(total / static_cast<double>(n));
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  return detail::make_result<T>({}, {loss}, "bce_loss", {probs},
                                [y, n, lo, hi](detail::Node<T> &o) {
    auto &np = *o.inputs[0];
    np.ensure_grad();
    const T g = o.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T q = np.value[i];
      if (q < lo || q > hi) continue;
      np.grad[i] += y[i] ? -g / q : g / (T(1) - q);
    }
  });
}

struct OneCycleConfig {
  double max_lr = 1e-5;
  std::size_t total_steps = 1;
  double warm_fraction = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  double momentum_high = 0.95;
  double momentum_low = 0.85;

  std::size_t peak_step() const {
    return static_cast<std::size_t>(std::floor(warm_fraction * static_cast<double>(total_steps)));
  }

  void validate() const {
    auto fail = [](const std::string &m) { throw ConfigError("one-cycle schedule: " + m); };
    if (!(max_lr > 0.0)) fail("max_lr must be positive");
    if (total_steps < 1) fail("total_steps must be >= 1");
    if (!(warm_fraction > 0.0 && warm_fraction < 1.0)) fail("warm_fraction must be in (0, 1)");
    if (!(div_factor > 1.0)) fail("div_factor must be > 1");
    if (!(final_div_factor > 1.0)) fail("final_div_factor must be > 1");
    if (!(momentum_low > 0.0 && momentum_low <= momentum_high && momentum_high < 1.0))
      fail("momenta must satisfy 0 < low <= high < 1");
  }
};

struct ScheduleValue {
  double lr;
  double momentum;
};

/**
 * Cosine one-cycle policy. Over steps [0, peak] the learning rate rises from
 * max_lr/div_factor to max_lr while momentum falls from high to low; over
 * (peak, total_steps - 1] the rate anneals to max_lr/final_div_factor and
 * momentum climbs back to high. peak = floor(warm_fraction * total_steps).
 */
inline ScheduleValue one_cycle(std::size_t step, const OneCycleConfig &cfg) {
  if (step >= cfg.total_steps) {
    throw ConfigError("one-cycle step " + std::to_string(step) +
                      " outside [0, " + std::to_string(cfg.total_steps) + ")");
  }
  auto cos_interp = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  const double start_lr = cfg.max_lr / cfg.div_factor;
  const double end_lr = cfg.max_lr / cfg.final_div_factor;
  const std::size_t peak = cfg.peak_step();
  if (step <= peak) {
    const double frac = peak == 0 ? 1.0 : static_cast<double>(step) / static_cast<double>(peak);
    return {cos_interp(start_lr, cfg.max_lr, frac),
            cos_interp(cfg.momentum_high, cfg.momentum_low, frac)};
  }
  const double span = static_cast<double>(cfg.total_steps - 1 - peak);
  const double frac = static_cast<double>(step - peak) / span;
  return {cos_interp(cfg.max_lr, end_lr, frac),
          cos_interp(cfg.momentum_low, cfg.momentum_high, frac)};
}

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Tensor<T>> params, double max_norm) {
  double sq = 0.0;
  for (auto &p : params)
    if (p.has_grad())
      for (auto g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto &p : params)
      if (p.has_grad())
        for (auto &g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

struct AdamConfig {
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/**
 * Adam with decoupled weight decay. beta1 is supplied per step so the
 * one-cycle momentum signal drives the first moment.
 */
template <typename T> class AdamW {
public:
  AdamW() = default;
  explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig &config() const { return cfg_; }
  std::size_t step_count() const { return step_; }
  const std::vector<std::vector<T>> &first_moments() const { return m_; }
  const std::vector<std::vector<T>> &second_moments() const { return v_; }

  /// Restores saved state; moment arrays must match the parameter sizes
  /// used on the next step().
  void restore(std::size_t step, std::vector<std::vector<T>> m,
               std::vector<std::vector<T>> v) {
    if (m.size() != v.size()) throw DataError("optimizer state: moment lists differ in length");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  void step(std::span<Tensor<T>> params, double lr, double beta1) {
    if (m_.empty() && step_ == 0) {
      for (auto &p : params) {
        m_.emplace_back(p.numel(), T(0));
        v_.emplace_back(p.numel(), T(0));
      }
    }
    if (m_.size() != params.size()) {
      throw ShapeError("adam: state tracks " + std::to_string(m_.size()) +
                       " parameters, step received " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (m_[i].size() != params[i].numel()) {
        throw ShapeError("adam: moment size " + std::to_string(m_[i].size()) +
                         " does not match parameter " + shape_str(params[i].shape()));
      }
      if (params[i].has_grad()) {
        for (auto g : params[i].grad()) {
          if (!std::isfinite(static_cast<double>(g))) {
            throw NumericError("adam: non-finite gradient in parameter " +
                               std::to_string(i) + "; step aborted");
          }
        }
      }
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const T b1 = static_cast<T>(beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, t));
    const T step_lr = static_cast<T>(lr);
    const T decay = static_cast<T>(lr * cfg_.weight_decay);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].data();
      if (decay != T(0))
        for (auto &x : w) x -= decay * x;
      if (!params[i].has_grad()) continue;
      auto g = params[i].grad();
      auto &m = m_[i];
      auto &v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        w[j] -= step_lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

} // namespace hallmark
