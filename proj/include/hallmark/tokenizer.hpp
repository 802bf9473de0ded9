// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   tokenizer.hpp
 * @brief  WordPiece vocabulary construction and greedy longest-match
 *         tokenization with cased/uncased normalization.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/unicode.hpp"

namespace hallmark {

enum class Casing { cased, uncased };

inline std::string_view to_string(Casing c) {
  return c == Casing::cased ? "cased" : "uncased";
}

inline Casing parse_casing(std::string_view s) {
  if (s == "cased") return Casing::cased;
  if (s == "uncased") return Casing::uncased;
  throw ConfigError("casing must be 'cased' or 'uncased', got '" +
                    std::string(s) + "'");
}

inline constexpr std::string_view continuation_prefix = "##";

/// Words longer than this (in code points) map straight to [UNK].
inline constexpr std::size_t max_word_chars = 100;

/**
 * Cleans text for tokenization.
 *
 * Control characters are removed, every whitespace run becomes one space,
 * punctuation characters become standalone words, and leading/trailing
 * spaces are dropped. Uncased mode also lowercases and removes accents
 * (precomposed accents are decomposed, combining marks dropped).
 */
inline std::string normalize(std::string_view text, Casing mode) {
  std::u32string cps = unicode::decode(text);
  std::u32string spaced;
  spaced.reserve(cps.size() + 8);
  for (char32_t c : cps) {
    if (unicode::is_control(c)) continue;
    if (unicode::is_whitespace(c)) {
      spaced.push_back(U' ');
      continue;
    }
    if (mode == Casing::uncased) {
      if (unicode::is_combining_mark(c)) continue;
      c = unicode::strip_accent(unicode::to_lower(c));
    }
    if (unicode::is_punctuation(c)) {
      spaced.push_back(U' ');
      spaced.push_back(c);
      spaced.push_back(U' ');
    } else {
      spaced.push_back(c);
    }
  }
  std::u32string out;
  out.reserve(spaced.size());
  for (char32_t c : spaced) {
    if (c == U' ' && (out.empty() || out.back() == U' ')) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == U' ') out.pop_back();
  return unicode::encode(out);
}

/// Splits normalized text on single spaces.
inline std::vector<std::string> split_words(std::string_view normalized) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < normalized.size()) {
    auto end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) words.emplace_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

class Vocab {
public:
  static constexpr std::size_t pad_id = 0;
  static constexpr std::size_t unk_id = 1;
  static constexpr std::size_t cls_id = 2;
  static constexpr std::size_t sep_id = 3;
  static constexpr std::size_t num_special = 4;

  static constexpr std::string_view pad_token = "[PAD]";
  static constexpr std::string_view unk_token = "[UNK]";
  static constexpr std::string_view cls_token = "[CLS]";
  static constexpr std::string_view sep_token = "[SEP]";

  explicit Vocab(Casing mode = Casing::uncased) : mode_(mode) {
    for (auto t : {pad_token, unk_token, cls_token, sep_token}) push(std::string(t));
  }

  /// Builds from a full id-ordered token list; the first four entries must
  /// be the special tokens in id order.
  Vocab(std::vector<std::string> tokens, Casing mode) : mode_(mode) {
    const std::string_view specials[] = {pad_token, unk_token, cls_token, sep_token};
    if (tokens.size() < num_special) {
      throw DataError("vocabulary has " + std::to_string(tokens.size()) +
                      " entries; the four special tokens are required");
    }
    for (std::size_t i = 0; i < num_special; ++i) {
      if (tokens[i] != specials[i]) {
        throw DataError("vocabulary id " + std::to_string(i) + " must be " +
                        std::string(specials[i]) + ", found '" + tokens[i] + "'");
      }
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto &t = tokens[i];
      if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos) {
        throw DataError("vocabulary id " + std::to_string(i) +
                        " holds an empty or whitespace-bearing token");
      }
      if (index_.count(t)) {
        throw DataError("duplicate vocabulary token '" + t + "' at id " +
                        std::to_string(i));
      }
      if (i >= num_special && mode == Casing::uncased && !is_lowercase(t)) {
        throw DataError("uncased vocabulary contains non-lowercase token '" +
                        t + "'");
      }
      push(t);
    }
  }

  Casing casing() const { return mode_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view token) const { return find(token).has_value(); }

  const std::string &token(std::size_t id) const {
    if (id >= tokens_.size()) {
      throw DataError("token id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(size()));
    }
    return tokens_[id];
  }

  static bool is_special(std::size_t id) { return id < num_special; }

  /// Appends a token if absent; returns true when it was added.
  bool add(std::string token) {
    if (index_.count(token)) return false;
    push(std::move(token));
    return true;
  }

  /// One token per line, line number == id, LF terminated.
  void save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write vocabulary file '" + path + "'");
    for (const auto &t : tokens_) out << t << '\n';
    if (!out) throw DataError("write failed for vocabulary file '" + path + "'");
  }

  static Vocab load(const std::string &path, Casing mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return Vocab(std::move(tokens), mode);
  }

  friend bool operator==(const Vocab &a, const Vocab &b) {
    return a.mode_ == b.mode_ && a.tokens_ == b.tokens_;
  }

private:
  static bool is_lowercase(std::string_view t) {
    for (char32_t c : unicode::decode(t))
      if (unicode::to_lower(c) != c) return false;
    return true;
  }

  void push(std::string t) {
    index_.emplace(t, tokens_.size());
    tokens_.push_back(std::move(t));
  }

  Casing mode_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/**
 * Builds a WordPiece-style vocabulary by greedy pair merging.
 *
 * Every word starts as its characters, the first bare and the rest with the
 * "##" prefix. The base alphabet is the set of such symbols. Then the most
 * frequent adjacent symbol pair is merged repeatedly (ties broken by the
 * lexicographically smallest pair) until the vocabulary reaches
 * `target_size` or no pair occurs at least twice.
 *
 * Token order: specials, base alphabet sorted bytewise, merges in order.
 */
template <typename Range>
Vocab build_vocab(const Range &corpus, std::size_t target_size, Casing mode) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto &text : corpus) {
    for (auto &w : split_words(normalize(text, mode))) ++word_counts[w];
  }

  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  std::set<std::string> alphabet;
  for (const auto &[w, count] : word_counts) {
    std::vector<std::string> symbols;
    const auto cps = unicode::decode(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string s = i == 0 ? std::string() : std::string(continuation_prefix);
      unicode::append_utf8(s, cps[i]);
      alphabet.insert(s);
      symbols.push_back(std::move(s));
    }
    words.emplace_back(std::move(symbols), count);
  }

  const std::size_t minimum = Vocab::num_special + alphabet.size();
  if (target_size < minimum) {
    throw ConfigError("vocabulary size " + std::to_string(target_size) +
                      " is below the " + std::to_string(minimum) +
                      " entries needed for specials and the base alphabet");
  }

  Vocab vocab(mode);
  for (const auto &s : alphabet) vocab.add(s);

  while (vocab.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const auto &[symbols, count] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
        pairs[{symbols[i], symbols[i + 1]}] += count;

    const std::pair<const std::pair<std::string, std::string>, std::size_t> *best = nullptr;
    for (const auto &entry : pairs)
      if (!best || entry.second > best->second) best = &entry;
    if (!best || best->second < 2) break;

    const auto [left, right] = best->first;
    std::string merged = left + right.substr(continuation_prefix.size());
    for (auto &[symbols, count] : words) {
      std::vector<std::string> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    vocab.add(std::move(merged));
  }
  return vocab;
}

/// Greedy longest-match-first segmentation of one normalized word.
/// Returns {[UNK]} when no full segmentation exists.
inline std::vector<std::size_t> wordpiece(std::string_view word, const Vocab &vocab) {
  const auto cps = unicode::decode(word);
  if (cps.empty()) return {};
  if (cps.size() > max_word_chars) return {Vocab::unk_id};
  std::vector<std::size_t> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::optional<std::size_t> found;
    std::size_t end = cps.size();
    for (; end > start; --end) {
      std::string candidate = start > 0 ? std::string(continuation_prefix) : std::string();
      candidate += unicode::encode(std::u32string_view(cps).substr(start, end - start));
      if ((found = vocab.find(candidate))) break;
    }
    if (!found) return {Vocab::unk_id};
    pieces.push_back(*found);
    start = end;
  }
  return pieces;
}

struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> mask;
  std::size_t n_real = 0;
  bool truncated = false;

  std::size_t size() const { return ids.size(); }
};

/// Normalize, segment, wrap in [CLS] ... [SEP], keep the head when the
/// content exceeds max_len - 2, then pad to max_len.
inline TokenSequence tokenize(std::string_view text, const Vocab &vocab,
                              std::size_t max_len) {
  if (max_len < 3) {
    throw ConfigError("max_len must be at least 3, got " + std::to_string(max_len));
  }
  std::vector<std::size_t> content;
  for (const auto &w : split_words(normalize(text, vocab.casing()))) {
    auto pieces = wordpiece(w, vocab);
    content.insert(content.end(), pieces.begin(), pieces.end());
  }
  TokenSequence seq;
  seq.truncated = content.size() > max_len - 2;
  if (seq.truncated) content.resize(max_len - 2);
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::cls_id);
  seq.ids.insert(seq.ids.end(), content.begin(), content.end());
  seq.ids.push_back(Vocab::sep_id);
  seq.n_real = seq.ids.size();
  seq.ids.resize(max_len, Vocab::pad_id);
  seq.mask.assign(max_len, 0);
  std::fill_n(seq.mask.begin(), seq.n_real, std::uint8_t{1});
  return seq;
}

/// Inverse of tokenize up to normalization: specials dropped, "##" pieces
/// glued to their predecessor, words joined by single spaces.
inline std::string detokenize(std::span<const std::size_t> ids, const Vocab &vocab) {
  std::string out;
  for (auto id : ids) {
    const auto &tok = vocab.token(id);
    if (id == Vocab::pad_id || id == Vocab::cls_id || id == Vocab::sep_id) continue;
    if (tok.starts_with(continuation_prefix) && tok.size() > continuation_prefix.size()) {
      out += tok.substr(continuation_prefix.size());
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline std::string detokenize(const TokenSequence &seq, const Vocab &vocab) {
  return detokenize(std::span<const std::size_t>(seq.ids), vocab);
}

} // namespace hallmark
