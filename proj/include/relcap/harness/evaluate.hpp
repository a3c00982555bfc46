#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relcap/data/dataset.hpp"
#include "relcap/data/vocab.hpp"
#include "relcap/metrics/metrics.hpp"
#include "relcap/model/checkpoint.hpp"

namespace relcap::harness {

struct Prediction {
  std::string id;
  std::string caption;
};

struct EvalResult {
  std::string split;
  metrics::MetricReport metrics;
  bool cider_defined = true;     // false when the split is too small for idf
  double token_accuracy = 0.0;   // see token_accuracy()
  double unk_rate = 0.0;         // fraction of reference tokens outside the vocabulary
  std::vector<Prediction> predictions;  // sorted by example id
};

// Position-wise agreement of the decoded sequence (with its EOS) against the
// best-matching reference (with its EOS), normalized by the longer of the
// two. Micro-averaged over examples: sum of matches / sum of lengths.
struct TokenAccuracy {
  std::size_t matched = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total); }
};
void accumulate_token_accuracy(TokenAccuracy& acc, const std::vector<model::TokenId>& decoded,
                               const std::vector<std::vector<model::TokenId>>& references);

// Greedy decodes every example of `split` (in batches) and scores it against
// all of its references. Throws when the split is empty or the grids do not
// match the model config.
EvalResult evaluate_split(const model::ModelConfig& config, const model::ModelParams& params,
                          const data::Vocabulary& vocab, const data::Dataset& dataset, data::Split split,
                          std::size_t batch_size = 64);

// Caption a single example.
std::string caption_example(const model::ModelConfig& config, const model::ModelParams& params,
                            const data::Vocabulary& vocab, const data::ExamplePair& example);

void check_compatible(const model::ModelConfig& config, const data::Dataset& dataset);

nlohmann::json to_json(const EvalResult& result);
void write_predictions(const EvalResult& result, const std::filesystem::path& path);

// Loads a checkpoint and its vocabulary.
struct LoadedModel {
  model::Checkpoint checkpoint;
  data::Vocabulary vocab;
  // Best parameters when the checkpoint tracks them, else the current ones.
  const model::ModelParams& params() const;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace relcap::harness
