// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace hallmark;
using namespace hallmark::testing;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string &s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

/// A desk run shrunk to a few seconds: synthetic corpus, one small layer.
RunConfig small_run(const fs::path &dir, std::size_t epochs = 2) {
  const auto corpus = dir / "corpus.tsv";
  if (!fs::exists(corpus)) {
    save_corpus(generate_synthetic(60, n_hallmarks, SyntheticSpec{}, 7).records, corpus.string());
  }
  auto cfg = RunConfig::defaults(Preset::desk);
  cfg.corpus = corpus.string();
  cfg.output_dir = (dir / "run").string();
  cfg.vocab_size = 200;
  auto &m = cfg.train.model;
  m.layers = 1;
  m.hidden = 16;
  m.heads = 2;
  m.ff = 32;
  m.max_len = 32;
  cfg.train.batch_size = 4;
  cfg.train.epochs = epochs;
  cfg.set_seed(5);
  return cfg;
}

std::string strip_first_line(const std::string &s) { return s.substr(s.find('\n') + 1); }

} // namespace

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

TEST(Train, ZeroEpochsIsAConfigError) {
  TinyRun run(40, 0);
  auto s = fresh_state<float>(run.options);
  EXPECT_THROW(hallmark::train(s, run.options, run.train, run.validation), ConfigError);
}

TEST(Train, SeededRunsAreIdentical) {
  TinyRun run(40, 2);
  auto a = fresh_state<float>(run.options);
  auto b = fresh_state<float>(run.options);
  const auto la = hallmark::train(a, run.options, run.train, run.validation);
  const auto lb = hallmark::train(b, run.options, run.train, run.validation);
  ASSERT_EQ(la.size(), 2u);
  for (std::size_t i = 0; i < la.size(); ++i)
    EXPECT_EQ(format_epoch_log(la[i]), format_epoch_log(lb[i]));
  EXPECT_EQ(flat_values(a.weights, a.config), flat_values(b.weights, b.config));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  TinyRun run(40, 3);
  auto full = fresh_state<float>(run.options);
  const auto full_logs = hallmark::train(full, run.options, run.train, run.validation);

  auto first = fresh_state<float>(run.options);
  const auto head = hallmark::train(first, run.options, run.train, run.validation, {}, 1);
  ASSERT_EQ(head.size(), 1u);
  const auto ck = deserialize(serialize(state_checkpoint(first, run.vocab)));
  auto resumed = state_from_checkpoint<float>(ck, run.options);
  EXPECT_EQ(resumed.epoch, 1u);
  const auto tail = hallmark::train(resumed, run.options, run.train, run.validation);
  ASSERT_EQ(tail.size(), 2u);
  EXPECT_EQ(format_epoch_log(head[0]), format_epoch_log(full_logs[0]));
  for (std::size_t i = 0; i < tail.size(); ++i)
    EXPECT_EQ(format_epoch_log(tail[i]), format_epoch_log(full_logs[i + 1]));
  EXPECT_EQ(flat_values(resumed.weights, resumed.config), flat_values(full.weights, full.config));
}

TEST(Train, ResumeRejectsDifferentModel) {
  TinyRun run(40, 1);
  auto s = fresh_state<float>(run.options);
  const auto ck = state_checkpoint(s, run.vocab);
  auto other = run.options;
  other.model.ff = 64;
  EXPECT_THROW(state_from_checkpoint<float>(ck, other), ConfigError);
}

TEST(Train, BestMetricNeverDecreases) {
  TinyRun run(60, 4);
  auto s = fresh_state<float>(run.options);
  double best = -INFINITY;
  std::size_t improved = 0;
  for (const auto &e : hallmark::train(s, run.options, run.train, run.validation)) {
    EXPECT_EQ(e.improved, e.selection > best) << "epoch " << e.epoch;
    if (e.improved) {
      best = e.selection;
      ++improved;
    }
    EXPECT_GE(s.best_metric, best);
  }
  EXPECT_GE(improved, 1u);
  EXPECT_EQ(s.best_metric, best);
}

TEST(Train, EpochLogHasEveryKey) {
  TinyRun run(40, 1);
  auto s = fresh_state<float>(run.options);
  const auto line = format_epoch_log(hallmark::train(s, run.options, run.train, run.validation)[0]);
  for (const char *key : {"epoch=1 ", "step=", "train_loss=", "lr=", "val_accuracy=",
                          "val_macro_precision=", "val_macro_recall=", "val_macro_f1=",
                          "val_auc=", "selection=", "improved="})
    EXPECT_NE(line.find(key), std::string::npos) << key;
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

TEST(Config, FileEntriesOverridePreset) {
  std::istringstream in("[model]\nlayers = 3\n[schedule]\nmax_lr = 0.002\n[train]\nepochs = 7\n");
  const auto cfg = resolve_config(read_config_entries(in, "mem"));
  EXPECT_EQ(cfg.preset, Preset::desk);
  EXPECT_EQ(cfg.train.model.layers, 3u);
  EXPECT_EQ(cfg.train.max_lr, 0.002);
  EXPECT_EQ(cfg.train.epochs, 7u);
  EXPECT_EQ(cfg.train.batch_size, 6u);
  EXPECT_EQ(cfg.train.model.hidden, 64u);
}

TEST(Config, PresetDefaults) {
  const auto desk = RunConfig::defaults(Preset::desk);
  EXPECT_EQ(desk.train.init, InitScheme::scaled);
  EXPECT_EQ(desk.train.max_lr, desk_max_lr);
  const auto paper = RunConfig::defaults(Preset::paper);
  EXPECT_EQ(paper.train.model.layers, 12u);
  EXPECT_EQ(paper.train.model.hidden, 768u);
  EXPECT_EQ(paper.train.model.max_len, 512u);
  EXPECT_EQ(paper.train.max_lr, 1e-5);
  EXPECT_EQ(paper.train.init, InitScheme::bert);
  EXPECT_EQ(paper.train.batch_size, 6u);
  EXPECT_EQ(paper.train.epochs, 20u);
}

TEST(Config, UnknownAndMalformedKeys) {
  std::istringstream unknown("[model]\nlayerz = 3\n");
  try {
    read_config_entries(unknown, "mem");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("model.layerz"), std::string::npos);
  }
  std::istringstream bad_value("[model]\nlayers = three\n");
  EXPECT_THROW(resolve_config(read_config_entries(bad_value, "mem")), ConfigError);
  std::istringstream bad_preset("[train]\npreset = huge\n");
  EXPECT_THROW(resolve_config(read_config_entries(bad_preset, "mem")), ConfigError);
  EXPECT_THROW(read_config_file("/nonexistent/run.ini"), ConfigError);
}

TEST(Config, IniRoundTrip) {
  auto cfg = RunConfig::defaults(Preset::desk);
  cfg.corpus = "/data/c.tsv";
  cfg.output_dir = "/tmp/out";
  cfg.train.model.layers = 3;
  cfg.train.max_lr = 2.5e-4;
  cfg.train.selection = parse_selection_metric("auc");
  cfg.set_seed(42);
  const auto text = cfg.to_ini();
  std::istringstream in(text);
  const auto back = resolve_config(read_config_entries(in, "mem"));
  EXPECT_EQ(back.to_ini(), text);
  EXPECT_EQ(back.train.init_seed, 43u);
}

TEST(Config, ValidationErrors) {
  const auto dir = scratch_dir("config_validate");
  auto cfg = small_run(dir);
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.train.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.corpus = (dir / "missing.tsv").string();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.train.model.heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);

  auto paper = RunConfig::defaults(Preset::paper);
  paper.corpus = cfg.corpus;
  paper.output_dir = cfg.output_dir;
  EXPECT_THROW(paper.validate(), ConfigError);
  paper.allow_large = true;
  EXPECT_NO_THROW(paper.validate());
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

TEST(Commands, DirectoryLockIsExclusive) {
  const auto dir = scratch_dir("lock");
  {
    DirectoryLock lock(dir);
    EXPECT_TRUE(fs::exists(dir / "train.lock"));
    EXPECT_THROW(DirectoryLock second(dir), ConfigError);
  }
  EXPECT_FALSE(fs::exists(dir / "train.lock"));
  EXPECT_NO_THROW(DirectoryLock again(dir));
  fs::remove_all(dir);
}

TEST(Commands, BuildVocabIsReproducible) {
  const auto dir = scratch_dir("build_vocab");
  const auto corpus = dir / "c.tsv";
  save_corpus(generate_synthetic(40, n_hallmarks, SyntheticSpec{}, 3).records, corpus.string());
  const auto a = cmd_build_vocab(corpus.string(), 150, Casing::uncased, (dir / "a.txt").string());
  cmd_build_vocab(corpus.string(), 150, Casing::uncased, (dir / "b.txt").string());
  EXPECT_EQ(read_file(dir / "a.txt"), read_file(dir / "b.txt"));
  EXPECT_LE(a.size(), 150u);
  EXPECT_TRUE(Vocab::load((dir / "a.txt").string(), Casing::uncased) == a);
  EXPECT_THROW(cmd_build_vocab(corpus.string(), 3, Casing::uncased, (dir / "c.txt").string()),
               ConfigError);
  fs::remove_all(dir);
}

TEST(Commands, TrainWritesArtifactsAndResumes) {
  const auto dir = scratch_dir("cmd_train");
  auto cfg = small_run(dir, 2);
  std::ostringstream out;
  const auto first = cmd_train(cfg, false, out, 1);
  ASSERT_EQ(first.epochs.size(), 1u);
  const fs::path run(cfg.output_dir);
  for (const char *f : {"config.ini", "split.manifest", "vocab.txt", "train.log", "last.ckpt"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_FALSE(fs::exists(run / "train.lock"));
  EXPECT_EQ(load((run / "last.ckpt").string()).meta.epoch, 1u);

  std::ostringstream out2;
  const auto second = cmd_train(cfg, true, out2);
  ASSERT_EQ(second.epochs.size(), 1u);
  EXPECT_EQ(second.epochs[0].epoch, 2u);
  EXPECT_NE(out2.str().find("resuming at epoch 1"), std::string::npos);
  EXPECT_TRUE(fs::exists(run / "best.ckpt"));
  EXPECT_THROW(cmd_train(cfg, true, out2), ConfigError);

  // The straight run writes the same log, apart from its timestamp line.
  auto straight = cfg;
  straight.output_dir = (dir / "straight").string();
  std::ostringstream out3;
  cmd_train(straight, false, out3);
  const auto log = read_file(run / "train.log");
  EXPECT_EQ(log.rfind("# started ", 0), 0u);
  EXPECT_EQ(strip_first_line(log), strip_first_line(read_file(fs::path(straight.output_dir) / "train.log")));
  EXPECT_EQ(read_file(run / "last.ckpt"), read_file(fs::path(straight.output_dir) / "last.ckpt"));

  std::istringstream ini(read_file(run / "config.ini"));
  const auto back = resolve_config(read_config_entries(ini, "config.ini"));
  EXPECT_EQ(back.train.model.hidden, 16u);
  EXPECT_EQ(back.train.epochs, 2u);
  fs::remove_all(dir);
}

TEST(Commands, TrainRefusesLockedDirectory) {
  const auto dir = scratch_dir("cmd_train_locked");
  auto cfg = small_run(dir, 1);
  fs::create_directories(cfg.output_dir);
  DirectoryLock held(cfg.output_dir);
  std::ostringstream out;
  EXPECT_THROW(cmd_train(cfg, false, out), ConfigError);
  fs::remove_all(dir);
}

class TrainedRun : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch_dir("trained_run"));
    auto cfg = small_run(*dir_, 1);
    std::ostringstream out;
    cmd_train(cfg, false, out);
    corpus_ = new std::string(cfg.corpus);
    run_ = new fs::path(cfg.output_dir);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    delete run_;
    delete corpus_;
  }
  static fs::path *dir_;
  static fs::path *run_;
  static std::string *corpus_;
};
fs::path *TrainedRun::dir_ = nullptr;
fs::path *TrainedRun::run_ = nullptr;
std::string *TrainedRun::corpus_ = nullptr;

TEST_F(TrainedRun, EvaluateWritesReproducibleReports) {
  EvaluateArgs a;
  a.checkpoint = (*run_ / "best.ckpt").string();
  a.corpus = *corpus_;
  a.output_dir = (*dir_ / "eval1").string();
  std::ostringstream out;
  cmd_evaluate(a, out);
  a.output_dir = (*dir_ / "eval2").string();
  std::ostringstream out2;
  cmd_evaluate(a, out2);
  EXPECT_EQ(out.str(), out2.str());
  const auto tsv = read_file(*dir_ / "eval1" / "report.tsv");
  EXPECT_EQ(tsv, read_file(*dir_ / "eval2" / "report.tsv"));
  const auto rows = lines_of(tsv);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[11].rfind("Average\t", 0), 0u);
  EXPECT_EQ(read_file(*dir_ / "eval1" / "report.txt"), out.str());

  a.split = "bogus";
  EXPECT_ANY_THROW(cmd_evaluate(a, out));
}

TEST_F(TrainedRun, EvaluateChecksVocabulary) {
  EvaluateArgs a;
  a.checkpoint = (*run_ / "best.ckpt").string();
  a.corpus = *corpus_;
  a.output_dir = (*dir_ / "eval_vocab").string();
  a.vocab = (*run_ / "vocab.txt").string();
  std::ostringstream out;
  EXPECT_NO_THROW(cmd_evaluate(a, out));
  auto words = lines_of(read_file(*run_ / "vocab.txt"));
  words.pop_back();
  std::string shorter;
  for (const auto &w : words) shorter += w + "\n";
  write_text_file(*dir_ / "other.txt", shorter);
  a.vocab = (*dir_ / "other.txt").string();
  EXPECT_THROW(cmd_evaluate(a, out), ConfigError);
}

TEST_F(TrainedRun, PredictIsDeterministicAndValidatesInput) {
  const auto ckpt = (*run_ / "best.ckpt").string();
  const std::vector<PredictInput> inputs = {{"a", "some words here"}, {"b", "some words here"}};
  std::ostringstream out;
  const auto probs = cmd_predict(ckpt, inputs, out);
  ASSERT_EQ(probs.size(), 2u);
  EXPECT_EQ(probs[0], probs[1]);
  EXPECT_EQ(probs[0].size(), n_hallmarks);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].substr(1), lines[1].substr(1));
  EXPECT_THROW(cmd_predict(ckpt, {{"x", "   "}}, out), DataError);
  EXPECT_THROW(cmd_predict(ckpt, {}, out), DataError);
}

TEST_F(TrainedRun, ZeroHeadPredictsOneHalf) {
  auto ck = load((*run_ / "best.ckpt").string());
  ck.optimizer.reset();
  for (auto &t : ck.tensors)
    if (t.name.rfind("head.", 0) == 0) std::fill(t.values.begin(), t.values.end(), 0.0f);
  const auto path = (*dir_ / "zero.ckpt").string();
  save(ck, path);
  std::ostringstream out;
  const auto probs = cmd_predict(path, {{"z", "anything at all"}}, out);
  for (double p : probs[0]) EXPECT_EQ(p, 0.5);
  EXPECT_NE(out.str().find("0.5000"), std::string::npos);
}

TEST(Commands, PredictInputFormat) {
  std::istringstream in("id1\tfirst text\nbare line\r\n");
  const auto got = read_predict_inputs(in);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].id, "id1");
  EXPECT_EQ(got[0].text, "first text");
  EXPECT_EQ(got[1].id, "line-2");
  EXPECT_EQ(got[1].text, "bare line");

  std::vector<double> probs(n_hallmarks, 0.1);
  probs[0] = 0.5;
  probs[9] = 0.92;
  const auto line = format_prediction("r", probs);
  EXPECT_EQ(line.rfind("r\t0.5000\t0.1000", 0), 0u);
  EXPECT_NE(line.find("\t{"), std::string::npos);
  EXPECT_EQ(std::count(line.begin(), line.end(), ';'), 1);
  std::vector<double> none(n_hallmarks, 0.2);
  EXPECT_EQ(format_prediction("n", none).substr(format_prediction("n", none).size() - 2), "{}");
}
