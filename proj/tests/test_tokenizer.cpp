// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"

using namespace hallmark;

namespace {

std::vector<std::string> ids_to_tokens(const std::vector<std::size_t> &ids, const Vocab &v) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(v.token(id));
  return out;
}

Vocab vocab_of(std::vector<std::string> extra, Casing mode = Casing::uncased) {
  std::vector<std::string> t = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  t.insert(t.end(), extra.begin(), extra.end());
  return Vocab(std::move(t), mode);
}

std::string random_unicode(std::mt19937_64 &rng, std::size_t len) {
  static const char32_t pool[] = {U'a', U'Z', U'é', U'É', U'ß', U'Ω', U'ж', U'Ж', U' ', U'\t',
                                  U'\n', U'-', U'.', U'(', U'3', U'́', U'\u0007', U'中',
                                  U'😀', U' ', U'ñ', U'Å'};
  std::u32string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(pool[rng() % std::size(pool)]);
  return unicode::encode(s);
}

} // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("", Casing::uncased), "");
  EXPECT_EQ(normalize("Tumor-promoting  Inflammation", Casing::uncased),
            "tumor - promoting inflammation");
  EXPECT_EQ(normalize("P53", Casing::cased), "P53");
}

TEST(Normalize, StripsControlsAndAccents) {
  EXPECT_EQ(normalize("Café\u0007 naıve\tRÉSUMÉ", Casing::uncased),
            "cafe naıve resume");
  EXPECT_EQ(normalize("Café", Casing::uncased), "cafe");
  EXPECT_EQ(normalize("Café", Casing::cased), "Café");
  EXPECT_EQ(normalize("  a\n\n b  ", Casing::cased), "a b");
}

TEST(BuildVocab, MinimalBudget) {
  std::vector<std::string> corpus = {"aaaa"};
  auto v = build_vocab(corpus, Vocab::num_special + 2, Casing::uncased);
  EXPECT_EQ(v.size(), Vocab::num_special + 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("##a"));
}

TEST(BuildVocab, MergeThresholdIsTwo) {
  std::vector<std::string> corpus = {"ab ab ab", "ac"};
  auto v = build_vocab(corpus, 100, Casing::uncased);
  EXPECT_TRUE(v.contains("ab"));
  EXPECT_FALSE(v.contains("ac"));
}

TEST(BuildVocab, EmptyCorpusGivesSpecialsOnly) {
  std::vector<std::string> corpus;
  auto v = build_vocab(corpus, 50, Casing::uncased);
  EXPECT_EQ(v.size(), Vocab::num_special);
  EXPECT_EQ(v.token(0), "[PAD]");
  EXPECT_EQ(v.token(1), "[UNK]");
  EXPECT_EQ(v.token(2), "[CLS]");
  EXPECT_EQ(v.token(3), "[SEP]");
}

TEST(BuildVocab, TooSmallBudgetIsAnError) {
  std::vector<std::string> corpus = {"abc"};
  EXPECT_THROW(build_vocab(corpus, Vocab::num_special + 1, Casing::uncased), ConfigError);
}

TEST(BuildVocab, DeterministicAndLowercaseWhenUncased) {
  auto syn = generate_synthetic(60, 10, {}, 4);
  std::vector<std::string> texts;
  for (auto &r : syn.records) texts.push_back(r.text + " Extra UPPER Words");
  auto a = build_vocab(texts, 300, Casing::uncased);
  auto b = build_vocab(texts, 300, Casing::uncased);
  EXPECT_TRUE(a == b);
  for (std::size_t i = Vocab::num_special; i < a.size(); ++i) {
    const auto &t = a.token(i);
    for (char c : t) EXPECT_FALSE(c >= 'A' && c <= 'Z') << t;
  }
  auto cased = build_vocab(texts, 300, Casing::cased);
  EXPECT_TRUE(cased.contains("U"));
}

TEST(BuildVocab, CoverageScanFindsNoAllUnknownWords) {
  auto syn = generate_synthetic(80, 10, {}, 9);
  std::vector<std::string> texts;
  for (auto &r : syn.records) texts.push_back(r.text);
  auto v = build_vocab(texts, 200, Casing::uncased);
  for (const auto &t : texts) {
    for (const auto &w : split_words(normalize(t, Casing::uncased))) {
      auto pieces = wordpiece(w, v);
      ASSERT_FALSE(pieces.empty());
      for (auto p : pieces) EXPECT_NE(p, Vocab::unk_id) << w;
    }
  }
}

TEST(Vocab, Invariants) {
  EXPECT_THROW(vocab_of({"ab", "ab"}), DataError);
  EXPECT_THROW(vocab_of({"Ab"}), DataError);
  EXPECT_NO_THROW(vocab_of({"Ab"}, Casing::cased));
  EXPECT_THROW(Vocab(std::vector<std::string>{"[UNK]", "[PAD]", "[CLS]", "[SEP]"}, Casing::cased),
               DataError);
  auto v = vocab_of({"ab"});
  EXPECT_THROW(v.token(99), DataError);
  EXPECT_EQ(*v.find("ab"), 4u);
}

TEST(Vocab, FileRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "hallmark_vocab_roundtrip.txt";
  auto v = vocab_of({"ab", "##ab", "été"});
  v.save(path.string());
  auto w = Vocab::load(path.string(), Casing::uncased);
  EXPECT_TRUE(v == w);
  std::filesystem::remove(path);
}

TEST(Wordpiece, GreedyLongestMatch) {
  auto v = vocab_of({"a", "b", "ab", "##ab", "##b"});
  EXPECT_EQ(ids_to_tokens(wordpiece("abab", v), v), (std::vector<std::string>{"ab", "##ab"}));
  EXPECT_EQ(ids_to_tokens(wordpiece("abb", v), v), (std::vector<std::string>{"ab", "##b"}));
  EXPECT_EQ(wordpiece("abc", v), (std::vector<std::size_t>{Vocab::unk_id}));
  EXPECT_EQ(wordpiece(std::string(101, 'a'), v), (std::vector<std::size_t>{Vocab::unk_id}));
}

TEST(Tokenize, EmptyText) {
  auto v = vocab_of({"ab"});
  auto s = tokenize("", v, 5);
  EXPECT_EQ(s.ids, (std::vector<std::size_t>{2, 3, 0, 0, 0}));
  EXPECT_EQ(s.mask, (std::vector<std::uint8_t>{1, 1, 0, 0, 0}));
  EXPECT_EQ(s.n_real, 2u);
}

TEST(Tokenize, TruncationKeepsHead) {
  auto v = vocab_of({"a", "b", "c"});
  auto s = tokenize("a b c a b c", v, 5);
  EXPECT_EQ(s.ids.size(), 5u);
  EXPECT_EQ(ids_to_tokens(s.ids, v), (std::vector<std::string>{"[CLS]", "a", "b", "c", "[SEP]"}));
  EXPECT_TRUE(s.truncated);
  EXPECT_EQ(s.n_real, 5u);
}

TEST(Tokenize, Pieces) {
  auto v = vocab_of({"ab", "##ab"});
  auto s = tokenize("abab", v, 6);
  EXPECT_EQ(ids_to_tokens(std::vector<std::size_t>(s.ids.begin() + 1, s.ids.begin() + 3), v),
            (std::vector<std::string>{"ab", "##ab"}));
}

TEST(Tokenize, MaxLenBelowThreeIsAnError) {
  auto v = vocab_of({});
  EXPECT_THROW(tokenize("x", v, 2), ConfigError);
}

TEST(Tokenize, FuzzInvariants) {
  std::mt19937_64 rng(17);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(random_unicode(rng, 40));
  auto v = build_vocab(corpus, 120, Casing::uncased);
  for (int i = 0; i < 300; ++i) {
    const std::size_t max_len = 3 + rng() % 20;
    auto text = random_unicode(rng, rng() % 60);
    auto s = tokenize(text, v, max_len);
    ASSERT_EQ(s.ids.size(), max_len);
    ASSERT_EQ(s.mask.size(), max_len);
    EXPECT_GE(s.n_real, 2u);
    EXPECT_LE(s.n_real, max_len);
    EXPECT_EQ(s.ids[0], Vocab::cls_id);
    EXPECT_EQ(s.ids[s.n_real - 1], Vocab::sep_id);
    for (std::size_t j = 0; j < max_len; ++j) {
      EXPECT_EQ(s.mask[j], j < s.n_real ? 1 : 0);
      if (j >= s.n_real) {
        EXPECT_EQ(s.ids[j], Vocab::pad_id);
      }
    }
    if (s.truncated) {
      EXPECT_EQ(s.n_real, max_len);
    }
  }
}

TEST(Tokenize, UncasedIgnoresCase) {
  auto syn = generate_synthetic(30, 10, {}, 2);
  std::vector<std::string> texts;
  for (auto &r : syn.records) texts.push_back(r.text);
  auto v = build_vocab(texts, 150, Casing::uncased);
  for (const auto &t : texts) {
    std::string upper = t;
    for (auto &c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    EXPECT_EQ(tokenize(t, v, 64).ids, tokenize(upper, v, 64).ids);
  }
  EXPECT_EQ(tokenize("ÉTÉ Ж", v, 16).ids, tokenize("été ж", v, 16).ids);
}

TEST(Detokenize, Examples) {
  auto v = vocab_of({"ab", "##ab"});
  EXPECT_EQ(detokenize(std::vector<std::size_t>{2, 3}, v), "");
  EXPECT_EQ(detokenize(std::vector<std::size_t>{2, 4, 5, 3}, v), "abab");
  EXPECT_THROW(detokenize(std::vector<std::size_t>{2, 42}, v), DataError);
}

TEST(Detokenize, RoundTripForVocabularyWords) {
  auto syn = generate_synthetic(40, 10, {}, 6);
  std::vector<std::string> texts;
  for (auto &r : syn.records) texts.push_back(r.text);
  auto v = build_vocab(texts, 400, Casing::uncased);
  std::size_t checked = 0;
  for (std::size_t id = Vocab::num_special; id < v.size(); ++id) {
    const auto &w = v.token(id);
    if (w.starts_with("##")) continue;
    EXPECT_EQ(detokenize(tokenize(w, v, 32), v), normalize(w, Casing::uncased));
    ++checked;
  }
  EXPECT_GT(checked, 10u);
  for (const auto &t : texts) EXPECT_EQ(detokenize(tokenize(t, v, 128), v), normalize(t, Casing::uncased));
}
