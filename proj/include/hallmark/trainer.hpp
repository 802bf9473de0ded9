// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   trainer.hpp
 * @brief  Fine-tuning loop with one-cycle scheduling and validation-based
 *         model selection, plus evaluation and prediction over records.
 */
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hallmark/checkpoint.hpp"
#include "hallmark/corpus.hpp"
#include "hallmark/errors.hpp"
#include "hallmark/metrics.hpp"
#include "hallmark/model.hpp"
#include "hallmark/optim.hpp"
#include "hallmark/tensor.hpp"
#include "hallmark/tokenizer.hpp"

namespace hallmark {

enum class SelectionMetric { macro_f1, accuracy, auc };

inline SelectionMetric parse_selection_metric(std::string_view s) {
  if (s == "macro_f1") return SelectionMetric::macro_f1;
  if (s == "accuracy") return SelectionMetric::accuracy;
  if (s == "auc") return SelectionMetric::auc;
  throw ConfigError("selection metric must be macro_f1, accuracy or auc, got '" +
                    std::string(s) + "'");
}

inline std::string_view to_string(SelectionMetric m) {
  switch (m) {
  case SelectionMetric::accuracy: return "accuracy";
  case SelectionMetric::auc: return "auc";
  default: return "macro_f1";
  }
}

inline double selection_value(const MetricsReport &r, SelectionMetric m) {
  switch (m) {
  case SelectionMetric::accuracy: return r.average.accuracy;
  case SelectionMetric::auc: return r.average.auc;
  default: return r.average.macro_f1;
  }
}

/// Everything the loop needs besides data.
struct TrainOptions {
  ModelConfig model;
  InitScheme init = InitScheme::bert;
  double max_lr = 1e-5;
  double warm_fraction = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  double momentum_high = 0.95;
  double momentum_low = 0.85;
  AdamConfig adam;
  double clip_norm = 1.0; ///< <= 0 disables clipping
  std::size_t batch_size = 6;
  std::size_t epochs = 20;
  std::uint64_t data_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t dropout_seed = 3;
  SelectionMetric selection = SelectionMetric::macro_f1;

  std::size_t steps_per_epoch(std::size_t n_train) const {
    return (n_train + batch_size - 1) / batch_size;
  }

  OneCycleConfig schedule(std::size_t n_train) const {
    OneCycleConfig s;
    s.max_lr = max_lr;
    s.total_steps = epochs * steps_per_epoch(n_train);
    s.warm_fraction = warm_fraction;
    s.div_factor = div_factor;
    s.final_div_factor = final_div_factor;
    s.momentum_high = momentum_high;
    s.momentum_low = momentum_low;
    return s;
  }

  void validate(std::size_t n_train) const {
    model.validate();
    if (epochs == 0) throw ConfigError("epochs must be >= 1: nothing to train");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (n_train == 0) throw DataError("training split is empty");
    schedule(n_train).validate();
  }
};

/// A tokenized record ready for the model.
struct Example {
  std::string id;
  TokenSequence seq;
  std::vector<std::uint8_t> labels;
};

inline std::vector<Example> prepare(const std::vector<HallmarkRecord> &records,
                                    const Vocab &vocab, std::size_t max_len) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto &r : records) out.push_back({r.id, tokenize(r.text, vocab, max_len), r.labels});
  return out;
}

/// Per-example probabilities in eval mode, [n_examples][n_labels].
template <typename T>
std::vector<std::vector<double>> predict(const std::vector<Example> &examples,
                                         const EncoderWeights<T> &w, const ModelConfig &c) {
  NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const auto &ex : examples) {
    auto p = predict_probs(ex.seq, w, c);
    out.emplace_back(p.values().begin(), p.values().end());
  }
  return out;
}

inline std::string label_name(std::size_t k, std::size_t n_labels) {
  if (n_labels == n_hallmarks) return std::string(hallmarks[k].name);
  return "label " + std::to_string(k);
}

/// One row per label plus the Average row.
inline MetricsReport report_from_scores(const std::vector<std::vector<double>> &scores,
                                        const std::vector<Example> &examples,
                                        std::size_t n_labels) {
  if (examples.empty()) throw DataError("cannot evaluate an empty split");
  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < n_labels; ++k) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      s.push_back(scores[i][k]);
      y.push_back(examples[i].labels.at(k));
    }
    rows.push_back(evaluate_hallmark(label_name(k, n_labels), s, y));
  }
  return build_report(std::move(rows));
}

template <typename T>
MetricsReport evaluate(const std::vector<Example> &examples, const EncoderWeights<T> &w,
                       const ModelConfig &c) {
  return report_from_scores(predict(examples, w, c), examples, c.n_labels);
}

struct EpochLog {
  std::size_t epoch = 0; ///< 1-based
  std::size_t step = 0;  ///< optimizer steps completed
  double train_loss = 0.0;
  double lr = 0.0;
  MetricsReport validation;
  double selection = 0.0;
  bool improved = false;
};

/// Mutable training state; exactly what a resume checkpoint captures.
template <typename T> struct TrainState {
  ModelConfig config;
  EncoderWeights<T> weights;
  AdamW<T> optimizer;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::mt19937_64 dropout_rng;

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    for (auto &[name, t] : weights.named(config)) out.push_back(t);
    return out;
  }
};

template <typename T> TrainState<T> fresh_state(const TrainOptions &opt) {
  opt.model.validate();
  std::mt19937_64 init_rng(splitmix64(opt.init_seed));
  TrainState<T> s{opt.model, init_weights<T>(opt.model, init_rng, opt.init), AdamW<T>(opt.adam),
                  0, 0, -std::numeric_limits<double>::infinity(),
                  std::mt19937_64(splitmix64(opt.dropout_seed))};
  return s;
}

inline std::string serialize_rng(const std::mt19937_64 &rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 deserialize_rng(const std::string &text) {
  std::mt19937_64 rng;
  std::istringstream is(text);
  is >> rng;
  if (!is) throw CheckpointError("checkpoint holds an unreadable RNG state");
  return rng;
}

template <typename T>
Checkpoint state_checkpoint(const TrainState<T> &s, const Vocab &vocab,
                            std::map<std::string, std::string> extra = {}) {
  TrainingMeta meta;
  meta.epoch = s.epoch;
  meta.step = s.step;
  meta.best_metric = s.best_metric;
  meta.dropout_rng = serialize_rng(s.dropout_rng);
  meta.extra = std::move(extra);
  return make_checkpoint(s.config, vocab, s.weights, &s.optimizer, std::move(meta));
}

template <typename T>
TrainState<T> state_from_checkpoint(const Checkpoint &ck, const TrainOptions &opt) {
  if (!(ck.config == opt.model)) {
    throw ConfigError("resume checkpoint was trained with a different model configuration");
  }
  TrainState<T> s{ck.config, weights_from<T>(ck), AdamW<T>(opt.adam), 0, 0, 0.0, {}};
  restore_optimizer(ck, s.optimizer);
  s.epoch = ck.meta.epoch;
  s.step = ck.meta.step;
  s.best_metric = ck.meta.best_metric;
  s.dropout_rng = ck.meta.dropout_rng.empty() ? std::mt19937_64(splitmix64(opt.dropout_seed))
                                              : deserialize_rng(ck.meta.dropout_rng);
  return s;
}

/// Forward + loss + backward + clipped AdamW step over one batch; returns
/// the batch loss.
template <typename T>
double train_step(TrainState<T> &s, const std::vector<const Example *> &batch,
                  const ScheduleValue &sched, double clip_norm) {
  auto params = s.parameters();
  for (auto &p : params) p.zero_grad();
  ForwardContext ctx{true, &s.dropout_rng};
  std::vector<Tensor<T>> probs;
  std::vector<std::uint8_t> labels;
  for (const auto *ex : batch) {
    probs.push_back(predict_probs(ex->seq, s.weights, s.config, ctx));
    labels.insert(labels.end(), ex->labels.begin(), ex->labels.end());
  }
  auto loss = bce_loss(stack_rows(probs), labels);
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) {
    throw NumericError("non-finite training loss at step " + std::to_string(s.step));
  }
  backward(loss);
  if (clip_norm > 0.0) clip_grad_norm<T>(params, clip_norm);
  try {
    s.optimizer.step(params, sched.lr, sched.momentum);
  } catch (const NumericError &e) {
    throw NumericError(std::string(e.what()) + " (step " + std::to_string(s.step) + ")");
  }
  ++s.step;
  return value;
}

struct TrainHooks {
  /// Called after each epoch, after selection bookkeeping.
  std::function<void(const EpochLog &)> on_epoch;
};

/**
 * Runs epochs [s.epoch, opt.epochs). Each epoch shuffles by (data_seed,
 * epoch), steps through batches under the one-cycle schedule, then scores
 * the validation split; an epoch whose selection metric beats the best so
 * far is flagged `improved`.
 */
template <typename T>
std::vector<EpochLog> train(TrainState<T> &s, const TrainOptions &opt,
                            const std::vector<Example> &train_set,
                            const std::vector<Example> &validation_set,
                            const TrainHooks &hooks = {}, std::size_t stop_after_epoch = 0) {
  opt.validate(train_set.size());
  const auto sched_cfg = opt.schedule(train_set.size());
  std::vector<EpochLog> logs;
  const std::size_t last = stop_after_epoch ? std::min(stop_after_epoch, opt.epochs) : opt.epochs;
  while (s.epoch < last) {
    EpochLog log;
    log.epoch = s.epoch + 1;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (const auto &idx : chunk(epoch_order(train_set.size(), opt.data_seed, s.epoch),
                                 opt.batch_size)) {
      std::vector<const Example *> batch;
      for (auto i : idx) batch.push_back(&train_set[i]);
      const auto sched = one_cycle(s.step, sched_cfg);
      loss_sum += train_step(s, batch, sched, opt.clip_norm);
      log.lr = sched.lr;
      ++batches;
    }
    ++s.epoch;
    log.step = s.step;
    log.train_loss = loss_sum / static_cast<double>(batches);
    if (!validation_set.empty()) {
      log.validation = evaluate(validation_set, s.weights, s.config);
      log.selection = selection_value(log.validation, opt.selection);
    } else {
      log.selection = -log.train_loss;
    }
    if (!std::isnan(log.selection) && log.selection > s.best_metric) {
      s.best_metric = log.selection;
      log.improved = true;
    }
    if (hooks.on_epoch) hooks.on_epoch(log);
    logs.push_back(std::move(log));
  }
  return logs;
}

/// Key=value rendering of one epoch for machine-readable logs.
inline std::string format_epoch_log(const EpochLog &log) {
  std::ostringstream os;
  os.precision(6);
  os << "epoch=" << log.epoch << " step=" << log.step << " train_loss=" << log.train_loss
     << " lr=" << log.lr;
  if (!log.validation.rows.empty()) {
    const auto &a = log.validation.average;
    os << " val_accuracy=" << a.accuracy << " val_macro_precision=" << a.macro_precision
       << " val_macro_recall=" << a.macro_recall << " val_macro_f1=" << a.macro_f1
       << " val_auc=" << a.auc;
  }
  os << " selection=" << log.selection << " improved=" << (log.improved ? 1 : 0);
  return os.str();
}

} // namespace hallmark
