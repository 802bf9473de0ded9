// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   commands.hpp
 * @brief  Implementations behind the command-line subcommands. Kept in the
 *         library so tests can drive them without spawning processes.
 */
#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hallmark/checkpoint.hpp"
#include "hallmark/config.hpp"
#include "hallmark/corpus.hpp"
#include "hallmark/errors.hpp"
#include "hallmark/metrics.hpp"
#include "hallmark/tokenizer.hpp"
#include "hallmark/trainer.hpp"

namespace hallmark {

namespace fs = std::filesystem;

/// Exclusive ownership of an output directory for the lifetime of a run.
class DirectoryLock {
public:
  explicit DirectoryLock(const fs::path &dir) : path_(dir / "train.lock") {
    std::FILE *f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw ConfigError("output directory " + dir.string() +
                        " is locked by another run (remove " + path_.string() +
                        " if no run is active)");
    }
    std::fclose(f);
  }
  DirectoryLock(const DirectoryLock &) = delete;
  DirectoryLock &operator=(const DirectoryLock &) = delete;
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

private:
  fs::path path_;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void write_text_file(const fs::path &path, const std::string &body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << body)) throw DataError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// build-vocab
// ---------------------------------------------------------------------------

inline Vocab cmd_build_vocab(const std::string &corpus_path, std::size_t size, Casing casing,
                             const std::string &out_path) {
  const auto records = load_corpus(corpus_path);
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto &r : records) texts.push_back(r.text);
  auto vocab = build_vocab(texts, size, casing);
  vocab.save(out_path);
  return vocab;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainSummary {
  std::vector<EpochLog> epochs; ///< epochs run by this invocation
  std::size_t best_epoch = 0;   ///< 0 when no epoch improved in this invocation
  double best_metric = 0.0;
  MetricsReport train_report;   ///< final weights on the training split
};

/**
 * Trains per `cfg` inside cfg.output_dir. Artifacts: config.ini, split.manifest,
 * vocab.txt, train.log, last.ckpt and best.ckpt. With `resume` the run
 * continues from last.ckpt in the same directory. `stop_after_epoch`
 * (0 = never) ends the invocation early, as an interrupted run would.
 */
inline TrainSummary cmd_train(const RunConfig &cfg, bool resume, std::ostream &out,
                              std::size_t stop_after_epoch = 0) {
  cfg.validate();
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  DirectoryLock lock(dir);

  const auto records = load_corpus(cfg.corpus);
  if (auto w = corpus_size_warning(records.size())) out << "note: " << *w << '\n';
  if (cfg.train.model.n_labels != n_hallmarks) {
    throw ConfigError("model.n_labels must be " + std::to_string(n_hallmarks) +
                      " for corpus files");
  }

  const fs::path last_path = dir / "last.ckpt";
  const fs::path best_path = dir / "best.ckpt";
  const fs::path manifest_path = dir / "split.manifest";
  TrainOptions opt = cfg.train;
  std::optional<TrainState<float>> state;
  Vocab vocab;
  SplitSet splits;

  if (resume) {
    if (!fs::exists(last_path)) throw ConfigError("--resume: no last.ckpt in " + dir.string());
    const auto ck = load(last_path.string());
    vocab = ck.vocab;
    opt.model.vocab_size = vocab.size();
    splits = split(records, SplitManifest::load(manifest_path.string()));
    state.emplace(state_from_checkpoint<float>(ck, opt));
    out << "resuming at epoch " << state->epoch << ", step " << state->step << '\n';
  } else {
    const auto manifest = cfg.split_manifest.empty()
                              ? SplitManifest::of(split(records, cfg.proportions, opt.data_seed))
                              : SplitManifest::load(cfg.split_manifest);
    splits = split(records, manifest);
    manifest.save(manifest_path.string());
    if (!cfg.vocab.empty()) {
      vocab = Vocab::load(cfg.vocab, cfg.casing);
    } else {
      std::vector<std::string> texts;
      for (const auto &r : splits.train) texts.push_back(r.text);
      vocab = build_vocab(texts, cfg.vocab_size, cfg.casing);
    }
    vocab.save((dir / "vocab.txt").string());
    opt.model.vocab_size = vocab.size();
    if (cfg.is_large(vocab.size()) && !cfg.allow_large) {
      throw ConfigError("model has " + std::to_string(parameter_count(opt.model)) +
                        " parameters, beyond desk scale; pass --allow-large to run it anyway");
    }
    state.emplace(fresh_state<float>(opt));
    RunConfig written = cfg;
    written.train.model.vocab_size = 0;
    write_text_file(dir / "config.ini", written.to_ini());
  }
  if (splits.train.empty()) throw DataError("training split is empty");
  if (state->epoch >= opt.epochs) {
    throw ConfigError("run in " + dir.string() + " already finished all " +
                      std::to_string(opt.epochs) + " epochs");
  }

  const auto train_set = prepare(splits.train, vocab, opt.model.max_len);
  const auto validation_set = prepare(splits.validation, vocab, opt.model.max_len);
  out << "train " << train_set.size() << ", validation " << validation_set.size() << ", test "
      << splits.test.size() << " records; vocab " << vocab.size() << "; "
      << parameter_count(opt.model) << " parameters\n";

  std::ofstream log(dir / "train.log", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open " + (dir / "train.log").string());
  if (!resume) log << "# started " << utc_timestamp() << '\n';

  TrainSummary summary;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog &e) {
    const std::string line = format_epoch_log(e);
    log << line << '\n' << std::flush;
    out << line << '\n' << std::flush;
    const auto ck = state_checkpoint(*state, vocab);
    if (e.improved) {
      save(ck, best_path.string());
      summary.best_epoch = e.epoch;
      summary.best_metric = e.selection;
    }
    save(ck, last_path.string());
  };
  summary.epochs = train(*state, opt, train_set, validation_set, hooks, stop_after_epoch);

  if (state->epoch == opt.epochs) {
    summary.train_report = evaluate(train_set, state->weights, state->config);
    std::ostringstream table;
    if (!fs::exists(best_path)) {
      table << "# no epoch produced a usable validation " << to_string(opt.selection) << '\n';
      log << table.str();
      out << table.str();
      return summary;
    }
    const auto best = load(best_path.string());
    table << "# best checkpoint: epoch " << best.meta.epoch << ", validation "
          << to_string(opt.selection) << " " << best.meta.best_metric << '\n';
    if (!validation_set.empty()) {
      const auto report = evaluate(validation_set, weights_from<float>(best), best.config);
      std::istringstream lines(report.to_text());
      for (std::string l; std::getline(lines, l);) table << "# " << l << '\n';
    }
    log << table.str();
    out << table.str();
  }
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string corpus;
  std::string split = "test"; ///< train | validation | test | all
  std::string split_manifest; ///< default: split.manifest beside the checkpoint
  std::string vocab;          ///< optional cross-check against the embedded vocabulary
  std::string output_dir;     ///< default: the checkpoint's directory
};

inline MetricsReport cmd_evaluate(const EvaluateArgs &a, std::ostream &out) {
  const auto ck = load(a.checkpoint);
  if (!a.vocab.empty()) {
    const auto v = Vocab::load(a.vocab, ck.vocab.casing());
    if (!(v == ck.vocab)) {
      throw ConfigError("vocabulary " + a.vocab + " does not match the one stored in " +
                        a.checkpoint);
    }
  }
  const auto records = load_corpus(a.corpus);
  std::vector<HallmarkRecord> chosen;
  if (a.split == "all") {
    chosen = records;
  } else {
    fs::path manifest = a.split_manifest;
    if (manifest.empty()) manifest = fs::path(a.checkpoint).parent_path() / "split.manifest";
    if (!fs::exists(manifest)) {
      throw ConfigError("no split manifest at " + manifest.string() +
                        "; pass --split-manifest or --split all");
    }
    const auto splits = split(records, SplitManifest::load(manifest.string()));
    chosen = splits.by_name(a.split);
  }
  const auto examples = prepare(chosen, ck.vocab, ck.config.max_len);
  const auto report = evaluate(examples, weights_from<float>(ck), ck.config);

  fs::path dir = a.output_dir.empty() ? fs::path(a.checkpoint).parent_path() : fs::path(a.output_dir);
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  write_text_file(dir / "report.txt", report.to_text());
  write_text_file(dir / "report.tsv", report.to_tsv());
  out << report.to_text();
  return report;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictInput {
  std::string id;
  std::string text;
};

/// One input per line: `<id>\t<text>`, or bare text (id becomes line-N).
inline std::vector<PredictInput> read_predict_inputs(std::istream &in) {
  std::vector<PredictInput> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    PredictInput p;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      p.id = line.substr(0, tab);
      p.text = line.substr(tab + 1);
    } else {
      p.id = "line-" + std::to_string(lineno);
      p.text = line;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string format_prediction(const std::string &id, const std::vector<double> &probs) {
  std::ostringstream os;
  os << id << std::fixed << std::setprecision(4);
  for (double p : probs) os << '\t' << p;
  os << "\t{";
  bool first = true;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] < decision_threshold) continue;
    os << (first ? "" : "; ") << label_name(k, probs.size());
    first = false;
  }
  os << '}';
  return os.str();
}

inline std::vector<std::vector<double>> cmd_predict(const std::string &checkpoint,
                                                    const std::vector<PredictInput> &inputs,
                                                    std::ostream &out) {
  if (inputs.empty()) throw DataError("no input text to classify");
  for (const auto &in : inputs) {
    if (split_words(normalize(in.text, Casing::cased)).empty()) {
      throw DataError("input '" + in.id + "' has empty text");
    }
  }
  const auto ck = load(checkpoint);
  const auto w = weights_from<float>(ck);
  std::vector<Example> examples;
  for (const auto &in : inputs) {
    examples.push_back({in.id, tokenize(in.text, ck.vocab, ck.config.max_len), {}});
  }
  auto probs = predict(examples, w, ck.config);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out << format_prediction(inputs[i].id, probs[i]) << '\n';
  }
  return probs;
}

} // namespace hallmark
