#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relcap/data/dataset.hpp"
#include "relcap/harness/evaluate.hpp"
#include "relcap/model/checkpoint.hpp"

namespace relcap::harness {

struct TrainConfig {
  model::Variant variant = model::Variant::dynamic_relational;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;  // evaluations without improvement
  std::string main_metric = "cider";
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // epochs
  std::size_t min_count = 3;   // vocabulary cutoff
  std::filesystem::path checkpoint_dir;  // empty: keep everything in memory; not serialized

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainOutcome {
  model::ModelConfig model_config;
  data::Vocabulary vocab;
  model::ModelParams best_params;
  model::Checkpoint last;           // full state at the end of the final epoch
  std::vector<nlohmann::json> log;  // one record per line of train_log.jsonl
  double initial_loss = 0.0;        // first batch, before any update
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool early_stopped = false;
  EvalResult test;  // best parameters on the test split (empty when absent)
  bool has_test = false;
};

// Trains from scratch. grid_side, feature_dim and vocab_size of `model_config`
// are taken from the dataset; everything else is used as given. With a
// checkpoint_dir, writes vocab.txt, train_log.jsonl, last.ckpt (every epoch),
// best.ckpt (on improvement), report.json and test_predictions.jsonl.
// Called with each epoch's log record as soon as it is written.
using EpochCallback = std::function<void(const nlohmann::json&)>;

TrainOutcome train(const TrainConfig& config, model::ModelConfig model_config, const data::Dataset& dataset,
                   const EpochCallback& on_epoch = {});

// Continues from a last.ckpt, writing into the directory that holds it.
// Given the same dataset the result matches an uninterrupted run; max_epochs
// may be raised for the continuation.
TrainOutcome resume(const std::filesystem::path& checkpoint, const data::Dataset& dataset,
                    std::optional<std::size_t> max_epochs = std::nullopt, const EpochCallback& on_epoch = {});

nlohmann::json outcome_report(const TrainConfig& config, const TrainOutcome& outcome);

}  // namespace relcap::harness
