// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   corpus.hpp
 * @brief  Hallmark-annotated abstracts: file format, splits, label
 *         statistics, epoch batching and a separable synthetic generator.
 *
 * Corpus file: UTF-8, LF-terminated lines of
 *   <id> TAB <10 chars of 0/1 in hallmark order> TAB <text>
 * Split manifest: `#train`, `#validation`, `#test` headers, one id per line.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/random.hpp"
#include "hallmark/tokenizer.hpp"

namespace hallmark {

struct Hallmark {
  std::string_view code;
  std::string_view name;
};

inline constexpr std::size_t n_hallmarks = 10;

/// Fixed label order used by every file format and report.
inline constexpr std::array<Hallmark, n_hallmarks> hallmarks = {{
    {"PS", "Sustaining proliferative signaling"},
    {"GS", "Evading growth suppressors"},
    {"CD", "Resisting cell death"},
    {"RI", "Enabling replicative immortality"},
    {"A", "Inducing angiogenesis"},
    {"IM", "Activating invasion and metastasis"},
    {"GI", "Genomic instability and mutation"},
    {"TPI", "Tumor promoting inflammation"},
    {"CE", "Cellular energetics"},
    {"ID", "Avoiding immune destruction"},
}};

inline constexpr std::size_t reference_corpus_size = 1852;

struct HallmarkRecord {
  std::string id;
  std::string text;
  std::vector<std::uint8_t> labels; ///< one 0/1 entry per hallmark

  friend bool operator==(const HallmarkRecord &, const HallmarkRecord &) = default;
};

inline std::string label_bits(const HallmarkRecord &r) {
  std::string s;
  for (auto b : r.labels) s.push_back(b ? '1' : '0');
  return s;
}

/// Parses corpus lines; `source` prefixes error messages.
inline std::vector<HallmarkRecord> parse_corpus(std::istream &in,
                                                const std::string &source = "corpus") {
  std::vector<HallmarkRecord> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string &msg) {
    throw DataError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) fail("expected <id>\\t<labels>\\t<text>");
    HallmarkRecord r;
    r.id = line.substr(0, t1);
    const std::string bits = line.substr(t1 + 1, t2 - t1 - 1);
    r.text = line.substr(t2 + 1);
    if (r.id.empty()) fail("empty id");
    if (r.text.find('\t') != std::string::npos) fail("text contains a tab");
    if (r.text.empty()) fail("empty text for id '" + r.id + "'");
    if (bits.size() != n_hallmarks) {
      fail("expected " + std::to_string(n_hallmarks) + " labels, got " +
           std::to_string(bits.size()));
    }
    for (char b : bits) {
      if (b != '0' && b != '1') fail("label string '" + bits + "' is not binary");
      r.labels.push_back(b == '1' ? 1 : 0);
    }
    if (!ids.insert(r.id).second) fail("duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<HallmarkRecord> load_corpus(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, path);
}

/// Canonical serialization; parse_corpus(format_corpus(x)) == x.
inline std::string format_corpus(const std::vector<HallmarkRecord> &records) {
  std::string out;
  for (const auto &r : records) {
    if (r.labels.size() != n_hallmarks) {
      throw DataError("record '" + r.id + "' has " + std::to_string(r.labels.size()) +
                      " labels; the corpus format needs " + std::to_string(n_hallmarks));
    }
    out += r.id;
    out += '\t';
    out += label_bits(r);
    out += '\t';
    out += r.text;
    out += '\n';
  }
  return out;
}

inline void save_corpus(const std::vector<HallmarkRecord> &records, const std::string &path) {
  const auto body = format_corpus(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  out << body;
}

/// Warning text when a corpus differs in size from the reference corpus.
inline std::optional<std::string> corpus_size_warning(std::size_t n) {
  if (n == reference_corpus_size) return std::nullopt;
  return "corpus has " + std::to_string(n) + " records; the reference corpus has " +
         std::to_string(reference_corpus_size);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitProportions {
  double train = 0.7036;
  double validation = 0.0988;
  double test = 0.1976;
};

struct SplitSet {
  std::vector<HallmarkRecord> train;
  std::vector<HallmarkRecord> validation;
  std::vector<HallmarkRecord> test;
  std::uint64_t seed = 0;

  const std::vector<HallmarkRecord> &by_name(std::string_view name) const {
    if (name == "train") return train;
    if (name == "validation") return validation;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + std::string(name) +
                      "' (expected train, validation or test)");
  }
};

struct SplitSizes {
  std::size_t train, validation, test;
};

/// Validation and test get round(n * p); train takes the remainder.
inline SplitSizes split_sizes(std::size_t n, const SplitProportions &p) {
  const double sum = p.train + p.validation + p.test;
  if (std::abs(sum - 1.0) > 1e-6 || p.train < 0 || p.validation < 0 || p.test < 0) {
    throw ConfigError("split proportions must be non-negative and sum to 1 (got " +
                      std::to_string(sum) + ")");
  }
  const double nd = static_cast<double>(n);
  auto va = static_cast<std::size_t>(std::floor(nd * p.validation + 0.5));
  auto te = static_cast<std::size_t>(std::floor(nd * p.test + 0.5));
  va = std::min(va, n);
  te = std::min(te, n - va);
  return {n - va - te, va, te};
}

/// Seeded shuffle, then contiguous train | validation | test partition.
inline SplitSet split(const std::vector<HallmarkRecord> &records,
                      const SplitProportions &p, std::uint64_t seed) {
  const auto sizes = split_sizes(records.size(), p);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed));
  shuffle_in_place(order, rng);
  SplitSet s;
  s.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto &r = records[order[i]];
    if (i < sizes.train) s.train.push_back(r);
    else if (i < sizes.train + sizes.validation) s.validation.push_back(r);
    else s.test.push_back(r);
  }
  return s;
}

struct SplitManifest {
  std::vector<std::string> train, validation, test;

  static SplitManifest of(const SplitSet &s) {
    SplitManifest m;
    for (const auto &r : s.train) m.train.push_back(r.id);
    for (const auto &r : s.validation) m.validation.push_back(r.id);
    for (const auto &r : s.test) m.test.push_back(r.id);
    return m;
  }

  std::string format() const {
    std::string out;
    auto section = [&](const char *name, const std::vector<std::string> &ids) {
      out += name;
      out += '\n';
      for (const auto &id : ids) out += id + '\n';
    };
    section("#train", train);
    section("#validation", validation);
    section("#test", test);
    return out;
  }

  static SplitManifest parse(std::istream &in, const std::string &source = "manifest") {
    SplitManifest m;
    std::vector<std::string> *current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line == "#train") current = &m.train;
      else if (line == "#validation") current = &m.validation;
      else if (line == "#test") current = &m.test;
      else if (line.empty()) continue;
      else if (!current)
        throw DataError(source + ":" + std::to_string(lineno) + ": id before any section header");
      else current->push_back(line);
    }
    return m;
  }

  static SplitManifest load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open split manifest '" + path + "'");
    return parse(in, path);
  }

  void save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write split manifest '" + path + "'");
    out << format();
  }
};

/// Reproduces a fixed split from explicit id lists.
inline SplitSet split(const std::vector<HallmarkRecord> &records, const SplitManifest &m) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);
  std::unordered_set<std::string> used;
  SplitSet s;
  auto take = [&](const std::vector<std::string> &ids, std::vector<HallmarkRecord> &dst) {
    for (const auto &id : ids) {
      auto it = index.find(id);
      if (it == index.end()) throw DataError("split manifest names unknown id '" + id + "'");
      if (!used.insert(id).second)
        throw DataError("split manifest lists id '" + id + "' more than once");
      dst.push_back(records[it->second]);
    }
  };
  take(m.train, s.train);
  take(m.validation, s.validation);
  take(m.test, s.test);
  return s;
}

/// Per-label (positive, negative) counts.
inline std::vector<std::pair<std::size_t, std::size_t>>
label_stats(const std::vector<HallmarkRecord> &records, std::size_t n_labels = n_hallmarks) {
  std::vector<std::pair<std::size_t, std::size_t>> out(n_labels, {0, 0});
  for (const auto &r : records) {
    if (r.labels.size() != n_labels) {
      throw DataError("record '" + r.id + "' has " + std::to_string(r.labels.size()) +
                      " labels, expected " + std::to_string(n_labels));
    }
    for (std::size_t k = 0; k < n_labels; ++k) (r.labels[k] ? out[k].first : out[k].second)++;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// Record order for one epoch; a pure function of (n, seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(splitmix64(seed) ^ (epoch + 0x5851F42D4C957F2DULL)));
  shuffle_in_place(order, rng);
  return order;
}

/// Consecutive chunks of at most batch_size; the last one may be short.
inline std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t> &order,
                                                   std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const auto end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

struct Batch {
  std::vector<std::string> ids;
  std::vector<TokenSequence> sequences;
  std::vector<std::uint8_t> labels; ///< [size x n_labels], row-major

  std::size_t size() const { return sequences.size(); }
};

inline std::vector<Batch> batch_iter(const std::vector<HallmarkRecord> &records,
                                     std::size_t batch_size, std::uint64_t seed,
                                     std::uint64_t epoch, const Vocab &vocab,
                                     std::size_t max_len) {
  std::vector<Batch> out;
  for (const auto &idx : chunk(epoch_order(records.size(), seed, epoch), batch_size)) {
    Batch b;
    for (auto i : idx) {
      b.ids.push_back(records[i].id);
      b.sequences.push_back(tokenize(records[i].text, vocab, max_len));
      b.labels.insert(b.labels.end(), records[i].labels.begin(), records[i].labels.end());
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t signature_words = 6;   ///< per label, disjoint across labels
  std::size_t background_words = 60; ///< shared filler vocabulary
  std::size_t min_signature = 3;     ///< signature words per positive label
  std::size_t max_signature = 4;
  std::size_t min_background = 8;
  std::size_t max_background = 16;
  double label_probability = 0.3;
};

struct SyntheticCorpus {
  std::vector<HallmarkRecord> records;
  std::vector<std::vector<std::string>> signatures; ///< per label
  std::vector<std::string> background;
};

namespace detail {
inline std::string random_word(std::mt19937_64 &rng) {
  const std::size_t len = 4 + uniform_index(rng, 5);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + uniform_index(rng, 26)));
  return w;
}
} // namespace detail

/**
 * Linearly separable multi-label corpus: label k owns a disjoint set of
 * signature words, and a record positive for k carries at least
 * `min_signature` of them among shuffled background words. Negatives never
 * contain them.
 */
inline SyntheticCorpus generate_synthetic(std::size_t n_records, std::size_t n_labels,
                                          const SyntheticSpec &spec, std::uint64_t seed) {
  if (n_records < 10) throw ConfigError("synthetic corpus needs at least 10 records");
  if (n_labels < 1) throw ConfigError("synthetic corpus needs at least one label");
  if (spec.min_signature < 1 || spec.min_signature > spec.max_signature ||
      spec.max_signature > spec.signature_words || spec.min_background < 1 ||
      spec.min_background > spec.max_background ||
      !(spec.label_probability > 0.0 && spec.label_probability < 1.0)) {
    throw ConfigError("inconsistent synthetic corpus spec");
  }
  std::mt19937_64 rng(splitmix64(seed));
  std::set<std::string> taken;
  auto fresh = [&] {
    for (;;) {
      auto w = detail::random_word(rng);
      if (taken.insert(w).second) return w;
    }
  };
  SyntheticCorpus c;
  c.signatures.resize(n_labels);
  for (auto &sig : c.signatures)
    for (std::size_t i = 0; i < spec.signature_words; ++i) sig.push_back(fresh());
  for (std::size_t i = 0; i < spec.background_words; ++i) c.background.push_back(fresh());

  for (std::size_t r = 0; r < n_records; ++r) {
    HallmarkRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", r);
    rec.id = id;
    std::vector<std::string> words;
    for (std::size_t k = 0; k < n_labels; ++k) {
      const bool pos = unit_uniform(rng) < spec.label_probability;
      rec.labels.push_back(pos ? 1 : 0);
      if (!pos) continue;
      auto pool = c.signatures[k];
      shuffle_in_place(pool, rng);
      const auto n = spec.min_signature +
                     uniform_index(rng, spec.max_signature - spec.min_signature + 1);
      words.insert(words.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    }
    const auto n_bg = spec.min_background +
                      uniform_index(rng, spec.max_background - spec.min_background + 1);
    for (std::size_t i = 0; i < n_bg; ++i)
      words.push_back(c.background[uniform_index(rng, c.background.size())]);
    shuffle_in_place(words, rng);
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) rec.text += ' ';
      rec.text += words[i];
    }
    c.records.push_back(std::move(rec));
  }
  return c;
}

} // namespace hallmark
