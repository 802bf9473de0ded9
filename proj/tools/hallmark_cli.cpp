// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   hallmark_cli.cpp
 * @brief  Command-line front end: build-vocab, train, evaluate, predict and
 *         synth.
 *
 * Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
 * failure, 1 anything else.
 */
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hallmark/hallmark.hpp"

namespace {

using namespace hallmark;

enum Exit : int { ok = 0, other = 1, config = 2, data = 3, numeric = 4 };

struct TrainFlags {
  std::string config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> corpus;
  std::optional<std::string> split_manifest;
  std::optional<std::string> vocab;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> max_lr;
  std::optional<std::size_t> max_len;
  bool allow_large = false;
  bool resume = false;
  std::size_t stop_after = 0;
};

RunConfig resolve(const TrainFlags &f) {
  ConfigEntries entries;
  if (!f.config_path.empty()) entries = read_config_file(f.config_path);
  std::optional<Preset> preset;
  if (f.preset) preset = parse_preset(*f.preset);
  RunConfig r = resolve_config(entries, preset);
  if (f.seed) r.set_seed(*f.seed);
  if (f.output_dir) r.output_dir = *f.output_dir;
  if (f.corpus) r.corpus = *f.corpus;
  if (f.split_manifest) r.split_manifest = *f.split_manifest;
  if (f.vocab) r.vocab = *f.vocab;
  if (f.epochs) r.train.epochs = *f.epochs;
  if (f.batch_size) r.train.batch_size = *f.batch_size;
  if (f.max_lr) r.train.max_lr = *f.max_lr;
  if (f.max_len) r.train.model.max_len = *f.max_len;
  r.allow_large = f.allow_large;
  return r;
}

int run_guarded(const std::function<void()> &body) {
  try {
    body();
    return Exit::ok;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const NumericError &e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return Exit::numeric;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return Exit::data;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::other;
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Transformer encoder fine-tuning for multi-label hallmark classification"};
  app.require_subcommand(1);
  std::function<void()> action;

  // build-vocab
  std::string bv_corpus, bv_out, bv_casing = "uncased";
  std::size_t bv_size = 1000;
  auto *bv = app.add_subcommand("build-vocab", "Build a WordPiece vocabulary from a corpus file");
  bv->add_option("--corpus", bv_corpus, "Corpus file (id<TAB>labels<TAB>text)")->required();
  bv->add_option("--size", bv_size, "Target vocabulary size")->capture_default_str();
  bv->add_option("--casing", bv_casing, "cased or uncased")->capture_default_str();
  bv->add_option("--out", bv_out, "Output vocabulary file")->required();
  bv->callback([&] {
    action = [&] {
      auto v = cmd_build_vocab(bv_corpus, bv_size, parse_casing(bv_casing), bv_out);
      std::cout << "wrote " << v.size() << " tokens to " << bv_out << '\n';
    };
  });

  // train
  TrainFlags tf;
  auto *tr = app.add_subcommand("train", "Fine-tune a model and keep the best validation checkpoint");
  tr->add_option("--config", tf.config_path, "INI run configuration");
  tr->add_option("--preset", tf.preset, "desk or paper");
  tr->add_option("--seed", tf.seed, "Seed for data order, init and dropout");
  tr->add_option("--output-dir", tf.output_dir, "Run directory (locked while training)");
  tr->add_option("--corpus", tf.corpus, "Corpus file");
  tr->add_option("--split-manifest", tf.split_manifest, "Fixed train/validation/test ids");
  tr->add_option("--vocab", tf.vocab, "Existing vocabulary file");
  tr->add_option("--epochs", tf.epochs, "Number of epochs");
  tr->add_option("--batch-size", tf.batch_size, "Records per optimizer step");
  tr->add_option("--max-lr", tf.max_lr, "Peak one-cycle learning rate");
  tr->add_option("--max-len", tf.max_len, "Sequence length in tokens");
  tr->add_flag("--allow-large", tf.allow_large, "Permit models beyond desk scale");
  tr->add_flag("--resume", tf.resume, "Continue from last.ckpt in the output directory");
  tr->add_option("--stop-after-epoch", tf.stop_after, "End this invocation after the given epoch");
  tr->callback([&] { action = [&] { cmd_train(resolve(tf), tf.resume, std::cout, tf.stop_after); }; });

  // evaluate
  EvaluateArgs ev;
  auto *evc = app.add_subcommand("evaluate", "Per-hallmark report for one split");
  evc->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  evc->add_option("--corpus", ev.corpus, "Corpus file")->required();
  evc->add_option("--split", ev.split, "train, validation, test or all")->capture_default_str();
  evc->add_option("--split-manifest", ev.split_manifest, "Defaults to split.manifest beside the checkpoint");
  evc->add_option("--vocab", ev.vocab, "Vocabulary expected to match the checkpoint");
  evc->add_option("--output-dir", ev.output_dir, "Where report.txt and report.tsv go");
  evc->callback([&] { action = [&] { cmd_evaluate(ev, std::cout); }; });

  // predict
  std::string pr_ckpt, pr_input;
  std::vector<std::string> pr_texts;
  auto *pr = app.add_subcommand("predict", "Hallmark probabilities for raw text");
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
  auto *text_opt = pr->add_option("--text", pr_texts, "Text to classify (repeatable)");
  pr->add_option("--input", pr_input, "File with one text per line, optionally id<TAB>text")
      ->excludes(text_opt);
  pr->callback([&] {
    action = [&] {
      std::vector<PredictInput> inputs;
      if (!pr_input.empty()) {
        std::ifstream in(pr_input);
        if (!in) throw DataError("cannot open input file " + pr_input);
        inputs = read_predict_inputs(in);
      }
      for (std::size_t i = 0; i < pr_texts.size(); ++i) {
        inputs.push_back({"text-" + std::to_string(i + 1), pr_texts[i]});
      }
      cmd_predict(pr_ckpt, inputs, std::cout);
    };
  });

  // synth
  std::string sy_out;
  std::size_t sy_records = 200;
  std::uint64_t sy_seed = 1;
  auto *sy = app.add_subcommand("synth", "Write a separable synthetic corpus");
  sy->add_option("--records", sy_records, "Number of records")->capture_default_str();
  sy->add_option("--seed", sy_seed, "Generator seed")->capture_default_str();
  sy->add_option("--out", sy_out, "Output corpus file")->required();
  sy->callback([&] {
    action = [&] {
      const auto c = generate_synthetic(sy_records, n_hallmarks, SyntheticSpec{}, sy_seed);
      save_corpus(c.records, sy_out);
      std::cout << "wrote " << c.records.size() << " records to " << sy_out << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::config;
  }
  return run_guarded(action);
}
