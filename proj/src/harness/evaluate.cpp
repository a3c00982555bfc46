#include "relcap/harness/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "relcap/data/tokenize.hpp"
#include "relcap/model/speaker.hpp"

namespace relcap::harness {

using data::Split;
using model::TokenId;

void check_compatible(const model::ModelConfig& config, const data::Dataset& dataset) {
  if (dataset.examples.empty()) throw std::invalid_argument("dataset is empty");
  if (dataset.grid_side() != config.grid_side || dataset.feature_dim() != config.feature_dim) {
    throw std::invalid_argument("model expects n=" + std::to_string(config.grid_side) +
                                " d=" + std::to_string(config.feature_dim) + " but dataset has n=" +
                                std::to_string(dataset.grid_side()) + " d=" + std::to_string(dataset.feature_dim()));
  }
}

void accumulate_token_accuracy(TokenAccuracy& acc, const std::vector<TokenId>& decoded,
                               const std::vector<std::vector<TokenId>>& references) {
  if (references.empty()) throw std::invalid_argument("token accuracy: no references");
  std::vector<TokenId> hyp = decoded;
  hyp.push_back(model::kEos);
  std::size_t best_matched = 0, best_total = 0;
  double best = -1.0;
  for (const auto& r : references) {
    std::vector<TokenId> ref = r;
    ref.push_back(model::kEos);
    std::size_t matched = 0;
    for (std::size_t i = 0; i < std::min(hyp.size(), ref.size()); ++i) matched += hyp[i] == ref[i] ? 1 : 0;
    const std::size_t total = std::max(hyp.size(), ref.size());
    const double score = static_cast<double>(matched) / static_cast<double>(total);
    if (score > best) {
      best = score;
      best_matched = matched;
      best_total = total;
    }
  }
  acc.matched += best_matched;
  acc.total += best_total;
}

EvalResult evaluate_split(const model::ModelConfig& config, const model::ModelParams& params,
                          const data::Vocabulary& vocab, const data::Dataset& dataset, Split split,
                          std::size_t batch_size) {
  check_compatible(config, dataset);
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  auto examples = dataset.split(split);
  if (examples.empty()) throw std::invalid_argument("dataset has no '" + std::string(to_string(split)) + "' split");
  std::sort(examples.begin(), examples.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  EvalResult result;
  result.split = std::string(to_string(split));
  std::vector<metrics::Sentence> candidates;
  std::vector<metrics::ReferenceSet> references;
  TokenAccuracy accuracy;
  std::size_t ref_tokens = 0, unk_tokens = 0;

  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, examples.size() - start);
    const std::span<const data::ExamplePair* const> batch(examples.data() + start, count);
    const auto decoded = model::greedy_decode(config, params, data::stack_grids(batch, true),
                                              data::stack_grids(batch, false));
    for (std::size_t b = 0; b < count; ++b) {
      const auto& ex = *batch[b];
      metrics::ReferenceSet refs;
      std::vector<std::vector<TokenId>> ref_ids;
      for (const auto& caption : ex.captions) {
        refs.push_back(data::tokenize(caption));
        ref_ids.push_back(vocab.encode(refs.back()));
        ref_tokens += ref_ids.back().size();
        unk_tokens += static_cast<std::size_t>(std::count(ref_ids.back().begin(), ref_ids.back().end(), model::kUnk));
      }
      const std::string text = vocab.decode(decoded[b]);
      candidates.push_back(data::tokenize(text));
      references.push_back(std::move(refs));
      accumulate_token_accuracy(accuracy, decoded[b], ref_ids);
      result.predictions.push_back({ex.id, text});
    }
  }

  const auto b = metrics::bleu(candidates, references, 4);
  result.metrics.bleu1 = b.bleu[0];
  result.metrics.bleu2 = b.bleu[1];
  result.metrics.bleu3 = b.bleu[2];
  result.metrics.bleu4 = b.bleu[3];
  result.metrics.rouge_l = metrics::rouge_l(candidates, references);
  result.metrics.n_examples = candidates.size();
  try {
    result.metrics.cider = metrics::cider(candidates, references).score;
  } catch (const std::invalid_argument&) {
    result.cider_defined = false;
    result.metrics.cider = 0.0;
  }
  result.token_accuracy = accuracy.value();
  result.unk_rate = ref_tokens == 0 ? 0.0 : static_cast<double>(unk_tokens) / static_cast<double>(ref_tokens);
  return result;
}

std::string caption_example(const model::ModelConfig& config, const model::ModelParams& params,
                            const data::Vocabulary& vocab, const data::ExamplePair& example) {
  const data::ExamplePair* batch[] = {&example};
  if (example.src.n != config.grid_side || example.src.d != config.feature_dim) {
    throw std::invalid_argument("example '" + example.id + "' does not match the model's n/d");
  }
  const auto decoded = model::greedy_decode(config, params, data::stack_grids(batch, true),
                                            data::stack_grids(batch, false));
  return vocab.decode(decoded[0]);
}

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json j = metrics::to_json(r.metrics);
  if (!r.cider_defined) j["cider"] = nullptr;
  j["split"] = r.split;
  j["token_accuracy"] = r.token_accuracy;
  j["unk_rate"] = r.unk_rate;
  return j;
}

void write_predictions(const EvalResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : result.predictions) out << nlohmann::json{{"id", p.id}, {"caption", p.caption}}.dump() << '\n';
}

const model::ModelParams& LoadedModel::params() const {
  return checkpoint.best_params.entries().empty() ? checkpoint.params : checkpoint.best_params;
}

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel loaded;
  loaded.checkpoint = model::read_checkpoint(path);
  const auto& tokens = loaded.checkpoint.vocab;
  if (tokens.size() < model::kNumSpecials) throw std::runtime_error(path.string() + ": checkpoint has no vocabulary");
  loaded.vocab = data::Vocabulary::from_words({tokens.begin() + model::kNumSpecials, tokens.end()});
  if (loaded.vocab.size() != loaded.checkpoint.config.vocab_size) {
    throw std::runtime_error(path.string() + ": vocabulary size does not match config");
  }
  return loaded;
}

}  // namespace relcap::harness
