// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   config.hpp
 * @brief  Run configuration: named presets, INI file loading and
 *         command-line overrides.
 */
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "hallmark/checkpoint.hpp"
#include "hallmark/corpus.hpp"
#include "hallmark/errors.hpp"
#include "hallmark/model.hpp"
#include "hallmark/tokenizer.hpp"
#include "hallmark/trainer.hpp"

namespace hallmark {

enum class Preset { desk, paper };

inline Preset parse_preset(std::string_view s) {
  if (s == "desk") return Preset::desk;
  if (s == "paper") return Preset::paper;
  throw ConfigError("preset must be desk or paper, got '" + std::string(s) + "'");
}

inline std::string_view to_string(Preset p) { return p == Preset::paper ? "paper" : "desk"; }

inline InitScheme parse_init_scheme(std::string_view s) {
  if (s == "scaled") return InitScheme::scaled;
  if (s == "bert") return InitScheme::bert;
  throw ConfigError("init must be scaled or bert, got '" + std::string(s) + "'");
}

inline std::string_view to_string(InitScheme s) { return s == InitScheme::bert ? "bert" : "scaled"; }

/// Peak rate of the desk preset (from-scratch training of the small model).
inline constexpr double desk_max_lr = 3e-3;

/// Parameter budget above which training needs an explicit opt-in.
inline constexpr std::size_t large_parameter_budget = 20'000'000;

struct RunConfig {
  std::string corpus;
  std::string split_manifest; ///< empty: split the corpus by seed
  std::string vocab;          ///< empty: build one from the training split
  std::string output_dir;

  Preset preset = Preset::desk;
  bool allow_large = false;
  Casing casing = Casing::uncased;
  std::size_t vocab_size = 1000; ///< target size when building a vocabulary
  SplitProportions proportions;
  TrainOptions train;

  /// Both presets share the recipe of batch 6 and 20 epochs. The paper
  /// preset fine-tunes BERT-base dimensions at max_lr 1e-5; the desk preset
  /// trains a small network from scratch, which needs a larger rate and
  /// fan-in scaled init.
  static RunConfig defaults(Preset p) {
    RunConfig r;
    r.preset = p;
    r.train.batch_size = 6;
    r.train.epochs = 20;
    if (p == Preset::paper) {
      r.train.model = ModelConfig::paper(0);
      r.train.init = InitScheme::bert;
      r.train.max_lr = 1e-5;
      r.vocab_size = 30000;
    } else {
      r.train.model = ModelConfig::desk(0);
      r.train.init = InitScheme::scaled;
      r.train.max_lr = desk_max_lr;
    }
    return r;
  }

  /// Sets every seed from one value: data = s, init = s + 1, dropout = s + 2.
  void set_seed(std::uint64_t s) {
    train.data_seed = s;
    train.init_seed = s + 1;
    train.dropout_seed = s + 2;
  }

  bool is_large(std::size_t vocab_entries) const {
    ModelConfig m = train.model;
    m.vocab_size = std::max(vocab_entries, Vocab::num_special);
    return preset == Preset::paper || parameter_count(m) > large_parameter_budget;
  }

  /// Checks everything that does not need the data.
  void validate() const {
    if (corpus.empty()) throw ConfigError("no corpus path configured ([paths] corpus or --corpus)");
    if (output_dir.empty()) throw ConfigError("no output directory configured (--output-dir)");
    for (const auto *p : {&corpus, &split_manifest, &vocab}) {
      if (!p->empty() && !std::filesystem::exists(*p)) {
        throw ConfigError("path does not exist: " + *p);
      }
    }
    ModelConfig m = train.model;
    m.vocab_size = std::max(m.vocab_size, Vocab::num_special);
    m.validate();
    if (train.epochs == 0) throw ConfigError("epochs must be >= 1: nothing to train");
    if (train.batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(train.clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
    OneCycleConfig s = train.schedule(1);
    s.validate();
    split_sizes(0, proportions);
    if (is_large(vocab_size) && !allow_large) {
      throw ConfigError("configuration exceeds desk scale (" + std::string(to_string(preset)) +
                        " preset); pass --allow-large to run it anyway");
    }
  }

  /// Every key in INI form; read_config_entries accepts exactly this key set.
  std::string to_ini() const {
    const auto &m = train.model;
    const auto &t = train;
    std::ostringstream os;
    os << "[paths]\ncorpus = " << corpus << "\nsplit_manifest = " << split_manifest
       << "\nvocab = " << vocab << "\noutput_dir = " << output_dir << "\n\n";
    os << "[model]\nlayers = " << m.layers << "\nhidden = " << m.hidden << "\nheads = " << m.heads
       << "\nff = " << m.ff << "\nmax_len = " << m.max_len << "\nn_labels = " << m.n_labels
       << "\ndropout = " << detail::fmt_double(m.dropout)
       << "\nln_eps = " << detail::fmt_double(m.ln_eps)
       << "\npositional = " << detail::enum_name(m.positional)
       << "\nactivation = " << detail::enum_name(m.activation)
       << "\nhead = " << detail::enum_name(m.head) << "\ninit = " << to_string(t.init) << "\n\n";
    os << "[tokenizer]\ncasing = " << to_string(casing) << "\nvocab_size = " << vocab_size
       << "\n\n";
    os << "[schedule]\nmax_lr = " << detail::fmt_double(t.max_lr)
       << "\nwarm_fraction = " << detail::fmt_double(t.warm_fraction)
       << "\ndiv_factor = " << detail::fmt_double(t.div_factor)
       << "\nfinal_div_factor = " << detail::fmt_double(t.final_div_factor)
       << "\nmomentum_high = " << detail::fmt_double(t.momentum_high)
       << "\nmomentum_low = " << detail::fmt_double(t.momentum_low) << "\n\n";
    os << "[optimizer]\nbeta2 = " << detail::fmt_double(t.adam.beta2)
       << "\neps = " << detail::fmt_double(t.adam.eps)
       << "\nweight_decay = " << detail::fmt_double(t.adam.weight_decay)
       << "\nclip_norm = " << detail::fmt_double(t.clip_norm) << "\n\n";
    os << "[train]\npreset = " << to_string(preset) << "\nbatch_size = " << t.batch_size
       << "\nepochs = " << t.epochs << "\ndata_seed = " << t.data_seed
       << "\ninit_seed = " << t.init_seed << "\ndropout_seed = " << t.dropout_seed
       << "\nselection = " << to_string(t.selection) << "\n\n";
    os << "[split]\ntrain = " << detail::fmt_double(proportions.train)
       << "\nvalidation = " << detail::fmt_double(proportions.validation)
       << "\ntest = " << detail::fmt_double(proportions.test) << "\n";
    return os.str();
  }
};

namespace detail {

using Setter = std::function<void(RunConfig &, const std::string &)>;

inline double config_double(const std::string &s, std::string_view key) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("config key " + std::string(key) + ": not a finite number: '" + s + "'");
  }
  return v;
}

inline std::size_t config_size(const std::string &s, std::string_view key) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("config key " + std::string(key) + ": not an unsigned integer: '" + s + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string &s, std::string_view key) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError("config key " + std::string(key) + ": not an unsigned integer: '" + s + "'");
  }
  return v;
}

inline const std::map<std::string, Setter> &config_setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["paths.corpus"] = [](RunConfig &r, const std::string &v) { r.corpus = v; };
    t["paths.split_manifest"] = [](RunConfig &r, const std::string &v) { r.split_manifest = v; };
    t["paths.vocab"] = [](RunConfig &r, const std::string &v) { r.vocab = v; };
    t["paths.output_dir"] = [](RunConfig &r, const std::string &v) { r.output_dir = v; };

    t["model.layers"] = [](RunConfig &r, const std::string &v) {
      r.train.model.layers = config_size(v, "model.layers");
    };
    t["model.hidden"] = [](RunConfig &r, const std::string &v) {
      r.train.model.hidden = config_size(v, "model.hidden");
    };
    t["model.heads"] = [](RunConfig &r, const std::string &v) {
      r.train.model.heads = config_size(v, "model.heads");
    };
    t["model.ff"] = [](RunConfig &r, const std::string &v) {
      r.train.model.ff = config_size(v, "model.ff");
    };
    t["model.max_len"] = [](RunConfig &r, const std::string &v) {
      r.train.model.max_len = config_size(v, "model.max_len");
    };
    t["model.n_labels"] = [](RunConfig &r, const std::string &v) {
      r.train.model.n_labels = config_size(v, "model.n_labels");
    };
    t["model.dropout"] = [](RunConfig &r, const std::string &v) {
      r.train.model.dropout = config_double(v, "model.dropout");
    };
    t["model.ln_eps"] = [](RunConfig &r, const std::string &v) {
      r.train.model.ln_eps = config_double(v, "model.ln_eps");
    };
    t["model.positional"] = [](RunConfig &r, const std::string &v) {
      r.train.model.positional = parse_positional(v);
    };
    t["model.activation"] = [](RunConfig &r, const std::string &v) {
      r.train.model.activation = parse_activation(v);
    };
    t["model.head"] = [](RunConfig &r, const std::string &v) {
      r.train.model.head = parse_head_mode(v);
    };
    t["model.init"] = [](RunConfig &r, const std::string &v) {
      r.train.init = parse_init_scheme(v);
    };

    t["tokenizer.casing"] = [](RunConfig &r, const std::string &v) { r.casing = parse_casing(v); };
    t["tokenizer.vocab_size"] = [](RunConfig &r, const std::string &v) {
      r.vocab_size = config_size(v, "tokenizer.vocab_size");
    };

    auto dbl = [&t](const std::string &key, double TrainOptions::*f) {
      t[key] = [f, key](RunConfig &r, const std::string &v) { r.train.*f = config_double(v, key); };
    };
    dbl("schedule.max_lr", &TrainOptions::max_lr);
    dbl("schedule.warm_fraction", &TrainOptions::warm_fraction);
    dbl("schedule.div_factor", &TrainOptions::div_factor);
    dbl("schedule.final_div_factor", &TrainOptions::final_div_factor);
    dbl("schedule.momentum_high", &TrainOptions::momentum_high);
    dbl("schedule.momentum_low", &TrainOptions::momentum_low);
    dbl("optimizer.clip_norm", &TrainOptions::clip_norm);
    t["optimizer.beta2"] = [](RunConfig &r, const std::string &v) {
      r.train.adam.beta2 = config_double(v, "optimizer.beta2");
    };
    t["optimizer.eps"] = [](RunConfig &r, const std::string &v) {
      r.train.adam.eps = config_double(v, "optimizer.eps");
    };
    t["optimizer.weight_decay"] = [](RunConfig &r, const std::string &v) {
      r.train.adam.weight_decay = config_double(v, "optimizer.weight_decay");
    };

    t["train.preset"] = [](RunConfig &, const std::string &v) { parse_preset(v); };
    t["train.batch_size"] = [](RunConfig &r, const std::string &v) {
      r.train.batch_size = config_size(v, "train.batch_size");
    };
    t["train.epochs"] = [](RunConfig &r, const std::string &v) {
      r.train.epochs = config_size(v, "train.epochs");
    };
    t["train.data_seed"] = [](RunConfig &r, const std::string &v) {
      r.train.data_seed = parse_u64(v, "train.data_seed");
    };
    t["train.init_seed"] = [](RunConfig &r, const std::string &v) {
      r.train.init_seed = parse_u64(v, "train.init_seed");
    };
    t["train.dropout_seed"] = [](RunConfig &r, const std::string &v) {
      r.train.dropout_seed = parse_u64(v, "train.dropout_seed");
    };
    t["train.selection"] = [](RunConfig &r, const std::string &v) {
      r.train.selection = parse_selection_metric(v);
    };

    t["split.train"] = [](RunConfig &r, const std::string &v) {
      r.proportions.train = config_double(v, "split.train");
    };
    t["split.validation"] = [](RunConfig &r, const std::string &v) {
      r.proportions.validation = config_double(v, "split.validation");
    };
    t["split.test"] = [](RunConfig &r, const std::string &v) {
      r.proportions.test = config_double(v, "split.test");
    };
    return t;
  }();
  return table;
}

} // namespace detail

/// Flattened "section.key" -> value pairs of an INI file.
using ConfigEntries = std::map<std::string, std::string>;

inline ConfigEntries read_config_entries(std::istream &in, const std::string &source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ConfigEntries out;
  for (const auto &[section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError(source + ": key '" + section + "' must sit inside a [section]");
    }
    for (const auto &[key, value] : keys) {
      const std::string full = section + "." + key;
      if (!detail::config_setters().count(full)) {
        throw ConfigError(source + ": unknown config key '" + full + "'");
      }
      out[full] = value.data();
    }
  }
  return out;
}

inline ConfigEntries read_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return read_config_entries(in, path);
}

/**
 * Resolves a run configuration. The preset (explicit argument first, then
 * the file's train.preset, else desk) supplies the base values; file
 * entries replace them. Command-line overrides are applied by the caller
 * afterwards.
 */
inline RunConfig resolve_config(const ConfigEntries &entries,
                                std::optional<Preset> preset = std::nullopt) {
  Preset p = Preset::desk;
  if (preset) p = *preset;
  else if (auto it = entries.find("train.preset"); it != entries.end()) p = parse_preset(it->second);
  RunConfig r = RunConfig::defaults(p);
  for (const auto &[key, value] : entries) {
    if (value.empty() && key.rfind("paths.", 0) != 0) {
      throw ConfigError("config key " + key + " has an empty value");
    }
    detail::config_setters().at(key)(r, value);
  }
  return r;
}

} // namespace hallmark
