// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   checkpoint.hpp
 * @brief  Self-describing binary checkpoints: config, vocabulary, weights,
 *         optimizer moments and resume metadata.
 *
 * Layout (see docs/checkpoint-format.md):
 *   1. UTF-8 header lines, starting with the magic line and ending with the
 *      line "end". Sections: [config], [meta], [optimizer], [vocab], [tensors].
 *   2. Tensor payloads, little-endian IEEE-754 binary32, concatenated in
 *      manifest order; manifest offsets are relative to the payload start.
 *   3. CRC-32 (zlib polynomial) of bytes 1+2, as 4 little-endian bytes.
 */
#pragma once

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hallmark/errors.hpp"
#include "hallmark/model.hpp"
#include "hallmark/optim.hpp"
#include "hallmark/tensor.hpp"
#include "hallmark/tokenizer.hpp"

namespace hallmark {

inline constexpr std::string_view checkpoint_magic = "hallmark-checkpoint";
inline constexpr int checkpoint_format_version = 1;

struct OptimizerState {
  AdamConfig config;
  std::size_t step = 0;
  /// Moments in the same order as Checkpoint::tensors.
  std::vector<std::vector<float>> first;
  std::vector<std::vector<float>> second;

  friend bool operator==(const OptimizerState &a, const OptimizerState &b) {
    return a.config.beta2 == b.config.beta2 && a.config.eps == b.config.eps &&
           a.config.weight_decay == b.config.weight_decay && a.step == b.step &&
           a.first == b.first && a.second == b.second;
  }
};

struct TrainingMeta {
  std::size_t epoch = 0; ///< completed epochs
  std::size_t step = 0;  ///< completed optimizer steps
  double best_metric = -std::numeric_limits<double>::infinity();
  std::string dropout_rng; ///< serialized std::mt19937_64
  std::map<std::string, std::string> extra;

  friend bool operator==(const TrainingMeta &, const TrainingMeta &) = default;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const NamedTensor &, const NamedTensor &) = default;
};

struct Checkpoint {
  int format_version = checkpoint_format_version;
  ModelConfig config;
  Vocab vocab;
  std::vector<NamedTensor> tensors;
  std::optional<OptimizerState> optimizer;
  TrainingMeta meta;

  const NamedTensor *find(std::string_view name) const {
    for (const auto &t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

template <typename T>
Checkpoint make_checkpoint(const ModelConfig &config, const Vocab &vocab,
                           const EncoderWeights<T> &weights, const AdamW<T> *optimizer = nullptr,
                           TrainingMeta meta = {}) {
  Checkpoint ck;
  ck.config = config;
  ck.vocab = vocab;
  for (const auto &[name, t] : weights.named(config)) {
    NamedTensor nt{name, t.shape(), {}};
    for (auto v : t.values()) nt.values.push_back(static_cast<float>(v));
    ck.tensors.push_back(std::move(nt));
  }
  if (optimizer && optimizer->step_count() > 0) {
    OptimizerState st;
    st.config = optimizer->config();
    st.step = optimizer->step_count();
    for (const auto &m : optimizer->first_moments())
      st.first.emplace_back(m.begin(), m.end());
    for (const auto &v : optimizer->second_moments())
      st.second.emplace_back(v.begin(), v.end());
    ck.optimizer = std::move(st);
  }
  ck.meta = std::move(meta);
  return ck;
}

/// Rebuilds trainable weights from a validated checkpoint.
template <typename T> EncoderWeights<T> weights_from(const Checkpoint &ck) {
  const auto &c = ck.config;
  auto get = [&](const std::string &name) {
    const auto *nt = ck.find(name);
    if (!nt) throw MissingTensorError("checkpoint lacks tensor '" + name + "'");
    std::vector<T> v(nt->values.begin(), nt->values.end());
    return Tensor<T>(nt->shape, std::move(v), true);
  };
  EncoderWeights<T> w;
  w.token_embedding = get("embeddings.token");
  w.positional = c.positional == PositionalMode::learned ? get("embeddings.position")
                                                         : sinusoidal_table<T>(c.max_len, c.hidden);
  for (std::size_t i = 0; i < c.layers; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    LayerWeights<T> l;
    l.wq = get(p + "attention.query");
    l.wk = get(p + "attention.key");
    l.wv = get(p + "attention.value");
    l.wo = get(p + "attention.output");
    l.ln1_gamma = get(p + "attention_norm.gamma");
    l.ln1_beta = get(p + "attention_norm.beta");
    l.ff_in_w = get(p + "ffn.in.weight");
    l.ff_in_b = get(p + "ffn.in.bias");
    l.ff_out_w = get(p + "ffn.out.weight");
    l.ff_out_b = get(p + "ffn.out.bias");
    l.ln2_gamma = get(p + "ffn_norm.gamma");
    l.ln2_beta = get(p + "ffn_norm.beta");
    w.layers.push_back(std::move(l));
  }
  w.head_w = get("head.weight");
  w.head_b = get("head.bias");
  return w;
}

/// Restores optimizer moments saved alongside the weights.
template <typename T> void restore_optimizer(const Checkpoint &ck, AdamW<T> &opt) {
  if (!ck.optimizer) return;
  std::vector<std::vector<T>> m, v;
  for (const auto &x : ck.optimizer->first) m.emplace_back(x.begin(), x.end());
  for (const auto &x : ck.optimizer->second) v.emplace_back(x.begin(), x.end());
  opt.restore(ck.optimizer->step, std::move(m), std::move(v));
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view key) {
  double v = 0.0;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CheckpointError("checkpoint: bad number '" + std::string(s) + "' for " + std::string(key));
  return v;
}

inline std::size_t parse_size(std::string_view s, std::string_view key) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CheckpointError("checkpoint: bad integer '" + std::string(s) + "' for " + std::string(key));
  return v;
}

inline void put_u32_le(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32_le(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto *p = reinterpret_cast<const Bytef *>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string shape_token(const Shape &s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

inline Shape parse_shape(std::string_view tok) {
  Shape s;
  if (tok == "scalar") return s;
  std::size_t start = 0;
  while (start <= tok.size()) {
    auto end = tok.find('x', start);
    if (end == std::string_view::npos) end = tok.size();
    s.push_back(parse_size(tok.substr(start, end - start), "shape"));
    start = end + 1;
  }
  return s;
}

template <typename E> std::string_view enum_name(E e);
template <> inline std::string_view enum_name(PositionalMode e) {
  return e == PositionalMode::learned ? "learned" : "sinusoidal";
}
template <> inline std::string_view enum_name(Activation e) {
  return e == Activation::relu ? "relu" : "gelu";
}
template <> inline std::string_view enum_name(HeadMode e) {
  return e == HeadMode::binary ? "binary" : "multi_label";
}

struct PayloadEntry {
  std::string name;
  Shape shape;
  const std::vector<float> *values;
};

inline void append_floats(std::string &out, const std::vector<float> &values) {
  for (float f : values) put_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

} // namespace detail

inline PositionalMode parse_positional(std::string_view s) {
  if (s == "sinusoidal") return PositionalMode::sinusoidal;
  if (s == "learned") return PositionalMode::learned;
  throw ConfigError("positional mode must be sinusoidal or learned, got '" + std::string(s) + "'");
}
inline Activation parse_activation(std::string_view s) {
  if (s == "gelu") return Activation::gelu;
  if (s == "relu") return Activation::relu;
  throw ConfigError("activation must be gelu or relu, got '" + std::string(s) + "'");
}
inline HeadMode parse_head_mode(std::string_view s) {
  if (s == "multi_label") return HeadMode::multi_label;
  if (s == "binary") return HeadMode::binary;
  throw ConfigError("head mode must be multi_label or binary, got '" + std::string(s) + "'");
}

/// Full file image; identical inputs give identical bytes.
inline std::string serialize(const Checkpoint &ck) {
  using detail::fmt_double;
  std::vector<detail::PayloadEntry> entries;
  for (const auto &t : ck.tensors) entries.push_back({t.name, t.shape, &t.values});
  if (ck.optimizer) {
    const auto &o = *ck.optimizer;
    if (o.first.size() != ck.tensors.size() || o.second.size() != ck.tensors.size()) {
      throw CheckpointError("optimizer state has " + std::to_string(o.first.size()) +
                            " moments for " + std::to_string(ck.tensors.size()) + " tensors");
    }
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
      entries.push_back({"optimizer.m/" + ck.tensors[i].name, ck.tensors[i].shape, &o.first[i]});
      entries.push_back({"optimizer.v/" + ck.tensors[i].name, ck.tensors[i].shape, &o.second[i]});
    }
  }

  std::ostringstream h;
  const auto &c = ck.config;
  h << checkpoint_magic << '\n'
    << "format_version = " << ck.format_version << '\n'
    << "[config]\n"
    << "layers = " << c.layers << '\n'
    << "hidden = " << c.hidden << '\n'
    << "heads = " << c.heads << '\n'
    << "ff = " << c.ff << '\n'
    << "vocab_size = " << c.vocab_size << '\n'
    << "max_len = " << c.max_len << '\n'
    << "n_labels = " << c.n_labels << '\n'
    << "dropout = " << fmt_double(c.dropout) << '\n'
    << "ln_eps = " << fmt_double(c.ln_eps) << '\n'
    << "positional = " << detail::enum_name(c.positional) << '\n'
    << "activation = " << detail::enum_name(c.activation) << '\n'
    << "head = " << detail::enum_name(c.head) << '\n'
    << "casing = " << to_string(ck.vocab.casing()) << '\n'
    << "[meta]\n"
    << "epoch = " << ck.meta.epoch << '\n'
    << "step = " << ck.meta.step << '\n'
    << "best_metric = " << fmt_double(ck.meta.best_metric) << '\n'
    << "dropout_rng = " << ck.meta.dropout_rng << '\n';
  for (const auto &[k, v] : ck.meta.extra) {
    if (k.find_first_of(" =\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw CheckpointError("checkpoint metadata key/value not representable: '" + k + "'");
    h << "extra." << k << " = " << v << '\n';
  }
  h << "[optimizer]\n";
  if (ck.optimizer) {
    const auto &o = *ck.optimizer;
    h << "present = 1\n"
      << "step = " << o.step << '\n'
      << "beta2 = " << fmt_double(o.config.beta2) << '\n'
      << "eps = " << fmt_double(o.config.eps) << '\n'
      << "weight_decay = " << fmt_double(o.config.weight_decay) << '\n';
  } else {
    h << "present = 0\n";
  }
  h << "[vocab]\n" << "count = " << ck.vocab.size() << '\n';
  for (const auto &tok : ck.vocab.tokens()) h << tok << '\n';
  h << "[tensors]\n" << "count = " << entries.size() << '\n';
  std::size_t offset = 0;
  for (const auto &e : entries) {
    if (numel_of(e.shape) != e.values->size()) {
      throw CheckpointError("tensor '" + e.name + "' holds " + std::to_string(e.values->size()) +
                            " values for shape " + shape_str(e.shape));
    }
    const std::size_t bytes = e.values->size() * 4;
    h << e.name << " f32 " << detail::shape_token(e.shape) << ' ' << offset << ' ' << bytes << '\n';
    offset += bytes;
  }
  h << "end\n";

  std::string out = h.str();
  out.reserve(out.size() + offset + 4);
  for (const auto &e : entries) detail::append_floats(out, *e.values);
  const auto crc = detail::crc32_of(out);
  detail::put_u32_le(out, crc);
  return out;
}

/// Parses and validates a file image: magic, version, checksum, then the
/// tensor manifest against the config.
inline Checkpoint deserialize(std::string_view bytes, const std::string &source = "checkpoint") {
  auto fail = [&](const std::string &m) -> void { throw CheckpointError(source + ": " + m); };

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) fail("truncated header");
    auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto key_value = [&](std::string_view line) {
    const auto eq = line.find(" = ");
    if (eq == std::string_view::npos) fail("malformed header line '" + std::string(line) + "'");
    return std::pair{line.substr(0, eq), line.substr(eq + 3)};
  };
  auto expect_section = [&](std::string_view name) {
    if (next_line() != name) fail("expected section " + std::string(name));
  };

  if (next_line() != checkpoint_magic) fail("not a hallmark checkpoint");
  {
    auto [k, v] = key_value(next_line());
    if (k != "format_version") fail("missing format_version");
    const auto version = detail::parse_size(v, k);
    if (version != static_cast<std::size_t>(checkpoint_format_version)) {
      throw VersionMismatchError(source + ": format version " + std::string(v) +
                                 " is not supported (expected " +
                                 std::to_string(checkpoint_format_version) + ")");
    }
  }

  if (bytes.size() < 4) fail("file too short");
  const auto body = bytes.substr(0, bytes.size() - 4);
  const auto stored =
      detail::get_u32_le(reinterpret_cast<const unsigned char *>(bytes.data() + body.size()));
  if (detail::crc32_of(body) != stored) {
    throw ChecksumError(source + ": CRC-32 mismatch; the file is corrupted");
  }

  Checkpoint ck;
  expect_section("[config]");
  std::map<std::string, std::string, std::less<>> cfg;
  Casing casing = Casing::uncased;
  for (int i = 0; i < 13; ++i) {
    auto [k, v] = key_value(next_line());
    cfg.emplace(std::string(k), std::string(v));
  }
  auto need = [&](const char *k) -> const std::string & {
    auto it = cfg.find(k);
    if (it == cfg.end()) fail(std::string("config lacks '") + k + "'");
    return it->second;
  };
  auto &c = ck.config;
  c.layers = detail::parse_size(need("layers"), "layers");
  c.hidden = detail::parse_size(need("hidden"), "hidden");
  c.heads = detail::parse_size(need("heads"), "heads");
  c.ff = detail::parse_size(need("ff"), "ff");
  c.vocab_size = detail::parse_size(need("vocab_size"), "vocab_size");
  c.max_len = detail::parse_size(need("max_len"), "max_len");
  c.n_labels = detail::parse_size(need("n_labels"), "n_labels");
  c.dropout = detail::parse_double(need("dropout"), "dropout");
  c.ln_eps = detail::parse_double(need("ln_eps"), "ln_eps");
  try {
    c.positional = parse_positional(need("positional"));
    c.activation = parse_activation(need("activation"));
    c.head = parse_head_mode(need("head"));
    casing = parse_casing(need("casing"));
    c.validate();
  } catch (const ConfigError &e) {
    throw CheckpointError(source + ": " + e.what());
  }

  expect_section("[meta]");
  for (;;) {
    const auto save = pos;
    auto line = next_line();
    if (line == "[optimizer]") {
      pos = save;
      break;
    }
    auto [k, v] = key_value(line);
    if (k == "epoch") ck.meta.epoch = detail::parse_size(v, k);
    else if (k == "step") ck.meta.step = detail::parse_size(v, k);
    else if (k == "best_metric") ck.meta.best_metric = detail::parse_double(v, k);
    else if (k == "dropout_rng") ck.meta.dropout_rng = std::string(v);
    else if (k.starts_with("extra.")) ck.meta.extra.emplace(std::string(k.substr(6)), std::string(v));
    else fail("unknown meta key '" + std::string(k) + "'");
  }

  expect_section("[optimizer]");
  bool has_opt = false;
  {
    auto [k, v] = key_value(next_line());
    if (k != "present") fail("optimizer section lacks 'present'");
    has_opt = v == "1";
  }
  if (has_opt) {
    OptimizerState o;
    for (int i = 0; i < 4; ++i) {
      auto [k, v] = key_value(next_line());
      if (k == "step") o.step = detail::parse_size(v, k);
      else if (k == "beta2") o.config.beta2 = detail::parse_double(v, k);
      else if (k == "eps") o.config.eps = detail::parse_double(v, k);
      else if (k == "weight_decay") o.config.weight_decay = detail::parse_double(v, k);
      else fail("unknown optimizer key '" + std::string(k) + "'");
    }
    ck.optimizer = std::move(o);
  }

  expect_section("[vocab]");
  {
    auto [k, v] = key_value(next_line());
    if (k != "count") fail("vocab section lacks 'count'");
    const auto n = detail::parse_size(v, k);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) tokens.emplace_back(next_line());
    try {
      ck.vocab = Vocab(std::move(tokens), casing);
    } catch (const DataError &e) {
      throw CheckpointError(source + ": " + e.what());
    }
  }
  if (ck.vocab.size() != c.vocab_size) {
    fail("vocabulary has " + std::to_string(ck.vocab.size()) + " tokens but config says " +
         std::to_string(c.vocab_size));
  }

  expect_section("[tensors]");
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset, bytes;
  };
  std::vector<Entry> manifest;
  {
    auto [k, v] = key_value(next_line());
    if (k != "count") fail("tensor section lacks 'count'");
    const auto n = detail::parse_size(v, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::istringstream ls{std::string(next_line())};
      std::string name, dtype, shape, off, nb;
      if (!(ls >> name >> dtype >> shape >> off >> nb)) fail("malformed tensor manifest line");
      if (dtype != "f32") fail("tensor '" + name + "' has unsupported dtype " + dtype);
      manifest.push_back({name, detail::parse_shape(shape), detail::parse_size(off, "offset"),
                          detail::parse_size(nb, "bytes")});
    }
  }
  if (next_line() != "end") fail("header not terminated by 'end'");

  const auto payload = body.substr(pos);
  auto read_values = [&](const Entry &e) {
    if (e.bytes != numel_of(e.shape) * 4 || e.offset + e.bytes > payload.size())
      fail("tensor '" + e.name + "' payload range is inconsistent");
    std::vector<float> v(e.bytes / 4);
    const auto *p = reinterpret_cast<const unsigned char *>(payload.data() + e.offset);
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = std::bit_cast<float>(detail::get_u32_le(p + 4 * i));
    return v;
  };

  std::unordered_map<std::string, const Entry *> by_name;
  for (const auto &e : manifest) by_name.emplace(e.name, &e);
  for (const auto &[name, shape] : expected_shapes(c)) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw MissingTensorError(source + ": missing tensor '" + name + "'");
    }
    if (it->second->shape != shape) {
      throw TensorShapeMismatchError(source + ": tensor '" + name + "' has shape " +
                                     shape_str(it->second->shape) + ", expected " +
                                     shape_str(shape));
    }
    ck.tensors.push_back({name, shape, read_values(*it->second)});
  }
  if (ck.optimizer) {
    for (const auto &t : ck.tensors) {
      for (bool first : {true, false}) {
        const std::string name = (first ? "optimizer.m/" : "optimizer.v/") + t.name;
        auto it = by_name.find(name);
        if (it == by_name.end())
          throw MissingTensorError(source + ": missing tensor '" + name + "'");
        if (it->second->shape != t.shape)
          throw TensorShapeMismatchError(source + ": tensor '" + name +
                                         "' does not match its parameter shape");
        (first ? ck.optimizer->first : ck.optimizer->second).push_back(read_values(*it->second));
      }
    }
  }
  return ck;
}

/// Test hook: abort the temp-file write after this many bytes.
struct SaveOptions {
  std::optional<std::size_t> fail_after_bytes;
};

/// Writes `path` atomically via a sibling temp file and rename.
inline void save(const Checkpoint &ck, const std::string &path, const SaveOptions &opts = {}) {
  const auto bytes = serialize(ck);
  const std::string tmp = path + ".tmp";
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    std::size_t n = bytes.size();
    if (opts.fail_after_bytes) n = std::min(n, *opts.fail_after_bytes);
    out.write(bytes.data(), static_cast<std::streamsize>(n));
    if (opts.fail_after_bytes && n < bytes.size())
      throw DataError("simulated write failure after " + std::to_string(n) + " bytes");
    out.flush();
    if (!out) throw DataError("write to '" + tmp + "' failed");
    out.close();
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

inline Checkpoint load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, path);
}

} // namespace hallmark
