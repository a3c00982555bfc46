#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "relcap/data/synth.hpp"
#include "relcap/harness/evaluate.hpp"
#include "relcap/harness/train.hpp"
#include "relcap/harness/verify.hpp"

namespace {

using namespace relcap;
using harness::TrainConfig;
namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("relcap_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

const data::Dataset& small_dataset() {
  static const data::Dataset ds = [] {
    data::SynthOptions o;
    o.seed = 11;
    o.count = 60;
    o.grid_side = 2;
    o.feature_dim = 8;
    return data::synth_generate(o);
  }();
  return ds;
}

model::ModelConfig small_model() {
  model::ModelConfig mc;
  mc.hidden_dim = 16;
  mc.embed_dim = 8;
  mc.max_decode_len = 12;
  return mc;
}

TrainConfig small_config(std::size_t epochs = 3) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.patience = 100;
  c.batch_size = 8;
  c.lr = 1e-3;
  c.seed = 5;
  return c;
}

const char* const kRunFiles[] = {"train_log.jsonl", "report.json", "test_predictions.jsonl", "vocab.txt"};

TEST(Train, RepeatedRunsWriteIdenticalFiles) {
  TrainConfig a = small_config(), b = small_config();
  a.checkpoint_dir = fresh_dir("det_a");
  b.checkpoint_dir = fresh_dir("det_b");
  harness::train(a, small_model(), small_dataset());
  harness::train(b, small_model(), small_dataset());
  for (const char* file : kRunFiles) EXPECT_EQ(slurp(a.checkpoint_dir / file), slurp(b.checkpoint_dir / file)) << file;
  EXPECT_EQ(slurp(a.checkpoint_dir / "last.ckpt"), slurp(b.checkpoint_dir / "last.ckpt"));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  TrainConfig full = small_config(4), part = small_config(2);
  full.checkpoint_dir = fresh_dir("resume_full");
  part.checkpoint_dir = fresh_dir("resume_part");
  harness::train(full, small_model(), small_dataset());
  harness::train(part, small_model(), small_dataset());
  const auto resumed = harness::resume(part.checkpoint_dir / "last.ckpt", small_dataset(), 4);
  EXPECT_EQ(resumed.epochs, 4u);
  for (const char* file : kRunFiles) {
    EXPECT_EQ(slurp(full.checkpoint_dir / file), slurp(part.checkpoint_dir / file)) << file;
  }
  EXPECT_EQ(slurp(full.checkpoint_dir / "last.ckpt"), slurp(part.checkpoint_dir / "last.ckpt"));
}

TEST(Train, ResumeNeedsOptimizerState) {
  TrainConfig c = small_config(1);
  c.checkpoint_dir = fresh_dir("resume_best");
  harness::train(c, small_model(), small_dataset());
  EXPECT_THROW(harness::resume(c.checkpoint_dir / "best.ckpt", small_dataset()), std::invalid_argument);
}

TEST(Train, InitialLossIsLogVocabularySize) {
  const auto out = harness::train(small_config(1), small_model(), small_dataset());
  const double expected = std::log(static_cast<double>(out.vocab.size()));
  EXPECT_NEAR(out.initial_loss, expected, 0.05 * expected);
}

TEST(Train, InMemoryRunMatchesLoggedRecords) {
  const auto out = harness::train(small_config(2), small_model(), small_dataset());
  ASSERT_EQ(out.log.size(), 4u);
  EXPECT_EQ(out.log.front()["type"], "config");
  EXPECT_EQ(out.log[1]["type"], "epoch");
  EXPECT_EQ(out.log.back()["type"], "final");
  EXPECT_TRUE(out.has_test);
  EXPECT_EQ(out.test.predictions.size(), small_dataset().split(data::Split::test).size());
}

// One example memorized: the validation split holds the same pair under a
// different id.
data::Dataset single_example() {
  data::Dataset ds;
  ds.examples.push_back(small_dataset().examples.front());
  auto& ex = ds.examples.front();
  ex.split = data::Split::train;
  ex.captions = {ex.captions.front()};
  auto val = ex;
  val.id = ex.id + "_val";
  val.split = data::Split::val;
  ds.examples.push_back(val);
  return ds;
}

TEST(Train, OverfitsASingleExample) {
  TrainConfig c;
  c.max_epochs = 200;
  c.patience = 1000;
  c.eval_every = 50;
  c.batch_size = 1;
  c.lr = 1e-2;
  c.min_count = 1;
  c.main_metric = "bleu4";
  auto mc = small_model();
  mc.hidden_dim = 32;
  mc.dropout_rate = 0.0;
  const auto ds = single_example();
  const auto out = harness::train(c, mc, ds);
  EXPECT_LT(out.log[out.log.size() - 2]["train_loss"].get<double>(), 0.05);
  EXPECT_EQ(harness::caption_example(out.model_config, out.best_params, out.vocab, ds.examples.front()),
            ds.examples.front().captions.front());
  const auto val = harness::evaluate_split(out.model_config, out.best_params, out.vocab, ds, data::Split::val);
  EXPECT_DOUBLE_EQ(val.metrics.bleu4, 1.0);
  EXPECT_DOUBLE_EQ(val.token_accuracy, 1.0);
  EXPECT_FALSE(val.cider_defined);
  EXPECT_TRUE(harness::to_json(val)["cider"].is_null());
}

TEST(Train, MissingSplitsAreReported) {
  data::Dataset no_val = small_dataset();
  std::erase_if(no_val.examples, [](const auto& ex) { return ex.split == data::Split::val; });
  try {
    harness::train(small_config(1), small_model(), no_val);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("'val'"), std::string::npos) << e.what();
  }
  data::Dataset no_train = small_dataset();
  std::erase_if(no_train.examples, [](const auto& ex) { return ex.split == data::Split::train; });
  EXPECT_THROW(harness::train(small_config(1), small_model(), no_train), std::invalid_argument);
}

TEST(Train, NonFiniteLossNamesTheBatch) {
  TrainConfig c = small_config(2);
  c.lr = 1e300;
  try {
    harness::train(c, small_model(), small_dataset());
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("non-finite loss"), std::string::npos) << what;
    EXPECT_NE(what.find("batch"), std::string::npos) << what;
    EXPECT_NE(what.find("examples"), std::string::npos) << what;
  }
}

TEST(Train, RejectsBadConfig) {
  TrainConfig c = small_config(1);
  c.main_metric = "meteor";
  EXPECT_THROW(harness::train(c, small_model(), small_dataset()), std::invalid_argument);
  c = small_config(1);
  c.batch_size = 0;
  EXPECT_THROW(harness::train(c, small_model(), small_dataset()), std::invalid_argument);
}

class Evaluate : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { outcome_ = new harness::TrainOutcome(harness::train(small_config(2), small_model(), small_dataset())); }
  static void TearDownTestSuite() {
    delete outcome_;
    outcome_ = nullptr;
  }
  static harness::EvalResult run(data::Split split) {
    return harness::evaluate_split(outcome_->model_config, outcome_->best_params, outcome_->vocab, small_dataset(),
                                   split);
  }
  static harness::TrainOutcome* outcome_;
};
harness::TrainOutcome* Evaluate::outcome_ = nullptr;

TEST_F(Evaluate, RepeatedEvaluationIsIdentical) {
  EXPECT_EQ(harness::to_json(run(data::Split::test)).dump(), harness::to_json(run(data::Split::test)).dump());
}

TEST_F(Evaluate, BatchSizeDoesNotChangeResults) {
  const auto a = harness::evaluate_split(outcome_->model_config, outcome_->best_params, outcome_->vocab,
                                         small_dataset(), data::Split::val, 1);
  EXPECT_EQ(harness::to_json(a).dump(), harness::to_json(run(data::Split::val)).dump());
}

TEST_F(Evaluate, ScoresStayInRange) {
  const auto r = run(data::Split::test);
  for (double v : {r.metrics.bleu1, r.metrics.bleu2, r.metrics.bleu3, r.metrics.bleu4, r.metrics.rouge_l,
                   r.token_accuracy, r.unk_rate}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GE(r.metrics.cider, 0.0);
  EXPECT_LE(r.metrics.cider, 10.0 + 1e-9);
  for (std::size_t i = 1; i < r.predictions.size(); ++i) EXPECT_LT(r.predictions[i - 1].id, r.predictions[i].id);
}

TEST_F(Evaluate, MismatchedGridIsRejected) {
  data::SynthOptions o;
  o.count = 20;
  o.grid_side = 3;
  o.feature_dim = 8;
  const auto other = data::synth_generate(o);
  EXPECT_THROW(harness::evaluate_split(outcome_->model_config, outcome_->best_params, outcome_->vocab, other,
                                       data::Split::test),
               std::invalid_argument);
}

TEST(TokenAccuracy, BestReferenceAndLongerLength) {
  harness::TokenAccuracy acc;
  // decoded 5 6 7 vs refs {5 6} and {5 9 7}: with EOS, 3 of 4 and 3 of 4.
  harness::accumulate_token_accuracy(acc, {5, 6, 7}, {{5, 6}, {5, 9, 7}});
  EXPECT_EQ(acc.matched, 3u);
  EXPECT_EQ(acc.total, 4u);
  harness::accumulate_token_accuracy(acc, {4}, {{4}});
  EXPECT_DOUBLE_EQ(acc.value(), 5.0 / 6.0);
}

TEST(Verify, AllChecksPass) {
  const auto report = harness::verify();
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.measure << " " << c.detail;
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.checks.size(), 20u);
  EXPECT_LT(report.seconds, 60.0);
}

TEST(Verify, InjectedFaultFailsTheGradchecks) {
  harness::VerifyOptions o;
  o.fault_op = "linear";
  const auto report = harness::verify(o);
  EXPECT_FALSE(report.passed());
  std::size_t failed = 0;
  for (const auto& c : report.checks) {
    if (c.name.rfind("gradcheck", 0) == 0) failed += c.passed ? 0 : 1;
  }
  EXPECT_EQ(failed, 4u);
}

}  // namespace
