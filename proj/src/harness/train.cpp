#include "relcap/harness/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "relcap/data/tokenize.hpp"
#include "relcap/model/speaker.hpp"
#include "relcap/numerics/adam.hpp"
#include "relcap/numerics/tape.hpp"

namespace relcap::harness {

using data::Split;
using model::TokenId;
using nlohmann::json;

namespace {

const char* const kMetricNames[] = {"bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider"};

struct TrainItem {
  const data::ExamplePair* example;
  std::vector<TokenId> tokens;
};

// Everything that evolves during training and is saved in last.ckpt.
struct RunState {
  model::ModelConfig model_config;
  data::Vocabulary vocab;
  model::ModelParams params;
  model::ModelParams best_params;
  numerics::AdamState adam;
  numerics::Rng rng;
  std::size_t epoch = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool has_best = false;
  std::size_t evals_since_best = 0;
  bool stopped = false;
  double initial_loss = 0.0;
  std::vector<json> epochs;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json config_record(const TrainConfig& config, const RunState& state, std::size_t train_items) {
  return json{{"type", "config"},
              {"train_config", config},
              {"model_config", state.model_config},
              {"train_items", train_items}};
}

json train_state_json(const RunState& s) {
  return json{{"epoch", s.epoch},
              {"best_epoch", s.best_epoch},
              {"best_metric", s.best_metric},
              {"has_best", s.has_best},
              {"evals_since_best", s.evals_since_best},
              {"stopped", s.stopped},
              {"initial_loss", s.initial_loss},
              {"epochs", s.epochs}};
}

model::Checkpoint make_checkpoint(const TrainConfig& config, const RunState& s, bool full) {
  model::Checkpoint ckpt;
  ckpt.config = s.model_config;
  ckpt.train_config = config;
  ckpt.vocab = s.vocab.tokens();
  ckpt.train_state = train_state_json(s);
  if (full) {
    ckpt.params = s.params.clone();
    ckpt.adam = s.adam;
    ckpt.rng_state = s.rng.state();
    if (s.has_best) ckpt.best_params = s.best_params.clone();
  } else {
    ckpt.params = (s.has_best ? s.best_params : s.params).clone();
  }
  return ckpt;
}

std::vector<TrainItem> training_items(const data::Dataset& dataset, const data::Vocabulary& vocab) {
  std::vector<TrainItem> items;
  for (const auto* ex : dataset.split(Split::train)) {
    for (const auto& caption : ex->captions) {
      auto tokens = vocab.encode_text(caption);
      if (tokens.empty()) throw std::invalid_argument("example '" + ex->id + "' has an empty caption");
      items.push_back({ex, std::move(tokens)});
    }
  }
  return items;
}

void check_main_metric_defined(const TrainConfig& config, const data::Dataset& dataset) {
  if (config.main_metric != "cider") return;
  std::vector<metrics::Sentence> candidates;
  std::vector<metrics::ReferenceSet> references;
  for (const auto* ex : dataset.split(Split::val)) {
    metrics::ReferenceSet refs;
    for (const auto& c : ex->captions) refs.push_back(data::tokenize(c));
    candidates.push_back(refs.front());
    references.push_back(std::move(refs));
  }
  try {
    metrics::cider(candidates, references);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("main metric cider is undefined on this validation split (") + e.what() +
                                "); choose another metric");
  }
}

// Runs epochs until max_epochs or early stopping, starting from `state`.
TrainOutcome run(const TrainConfig& config, RunState state, const data::Dataset& dataset,
                 const EpochCallback& on_epoch) {
  const auto items = training_items(dataset, state.vocab);
  const auto& mc = state.model_config;
  const numerics::AdamConfig adam_config{.lr = config.lr};
  const bool persist = !config.checkpoint_dir.empty();
  if (persist) {
    std::filesystem::create_directories(config.checkpoint_dir);
    state.vocab.write(config.checkpoint_dir / "vocab.txt");
  }
  const json header = config_record(config, state, items.size());
  auto write_log = [&](const std::vector<json>& extra) {
    if (!persist) return;
    std::string text = header.dump() + "\n";
    for (const auto& e : state.epochs) text += e.dump() + "\n";
    for (const auto& e : extra) text += e.dump() + "\n";
    write_text(config.checkpoint_dir / "train_log.jsonl", text);
  };

  while (!state.stopped && state.epoch < config.max_epochs) {
    const std::size_t epoch = state.epoch + 1;
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    state.rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<const data::ExamplePair*> batch;
      std::vector<std::vector<TokenId>> refs;
      for (std::size_t k = 0; k < count; ++k) {
        batch.push_back(items[order[start + k]].example);
        refs.push_back(items[order[start + k]].tokens);
      }
      state.params.zero_grad();
      numerics::Tape tape;
      numerics::Tensor loss;
      {
        numerics::TapeScope scope(tape);
        loss = model::sequence_loss(mc, state.params, data::stack_grids(batch, true), data::stack_grids(batch, false),
                                    refs, model::ForwardMode{.training = true, .rng = &state.rng});
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::string ids;
        for (const auto* ex : batch) ids += (ids.empty() ? "" : ",") + ex->id;
        throw std::runtime_error("non-finite loss " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(steps) + " (examples " + ids + ")");
      }
      if (epoch == 1 && steps == 0) state.initial_loss = value;
      tape.backward(loss);
      auto tensors = state.params.tensors();
      numerics::adam_step(tensors, state.adam, adam_config);
      loss_sum += value;
      ++steps;
    }

    json record{{"type", "epoch"}, {"epoch", epoch}, {"steps", steps},
                {"train_loss", loss_sum / static_cast<double>(steps)}};
    if (epoch == 1) record["initial_loss"] = state.initial_loss;
    if (epoch % config.eval_every == 0) {
      const auto val = evaluate_split(mc, state.params, state.vocab, dataset, Split::val);
      const double metric = val.metrics.get(config.main_metric);
      const bool improved = !state.has_best || metric > state.best_metric;
      if (improved) {
        state.has_best = true;
        state.best_metric = metric;
        state.best_epoch = epoch;
        state.best_params = state.params.clone();
        state.evals_since_best = 0;
      } else {
        ++state.evals_since_best;
      }
      record["val"] = to_json(val);
      record["improved"] = improved;
      if (state.evals_since_best >= config.patience) state.stopped = true;
    }
    state.epoch = epoch;
    state.epochs.push_back(record);
    if (persist) {
      model::write_checkpoint(make_checkpoint(config, state, true), config.checkpoint_dir / "last.ckpt");
      if (record.value("improved", false)) {
        model::write_checkpoint(make_checkpoint(config, state, false), config.checkpoint_dir / "best.ckpt");
      }
      write_log({});
    }
    if (on_epoch) on_epoch(record);
  }

  TrainOutcome out;
  out.model_config = mc;
  out.vocab = state.vocab;
  out.best_params = (state.has_best ? state.best_params : state.params).clone();
  out.last = make_checkpoint(config, state, true);
  out.initial_loss = state.initial_loss;
  out.epochs = state.epoch;
  out.best_epoch = state.best_epoch;
  out.best_metric = state.best_metric;
  out.early_stopped = state.stopped;
  if (!dataset.split(Split::test).empty()) {
    out.test = evaluate_split(mc, out.best_params, state.vocab, dataset, Split::test);
    out.has_test = true;
  }
  json final_record = outcome_report(config, out);
  final_record["type"] = "final";
  out.log.push_back(header);
  for (const auto& e : state.epochs) out.log.push_back(e);
  out.log.push_back(final_record);
  if (persist) {
    write_log({final_record});
    if (!state.has_best) {
      model::write_checkpoint(make_checkpoint(config, state, false), config.checkpoint_dir / "best.ckpt");
    }
    write_text(config.checkpoint_dir / "report.json", final_record.dump(2) + "\n");
    if (out.has_test) write_predictions(out.test, config.checkpoint_dir / "test_predictions.jsonl");
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  bool known = false;
  for (const char* name : kMetricNames) known = known || main_metric == name;
  if (!known) throw std::invalid_argument("unknown main metric '" + main_metric + "' (bleu1..bleu4|rougeL|cider)");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"variant", std::string(model::to_string(c.variant))},
           {"lr", c.lr},
           {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"main_metric", c.main_metric},
           {"seed", c.seed},
           {"eval_every", c.eval_every},
           {"min_count", c.min_count}};
}

void from_json(const json& j, TrainConfig& c) {
  c.variant = model::parse_variant(j.at("variant").get<std::string>());
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.main_metric = j.at("main_metric").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eval_every = j.at("eval_every").get<std::size_t>();
  c.min_count = j.at("min_count").get<std::size_t>();
}

TrainOutcome train(const TrainConfig& config, model::ModelConfig model_config, const data::Dataset& dataset,
                   const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.split(Split::train).empty()) throw std::invalid_argument("dataset has no 'train' split");
  if (dataset.split(Split::val).empty()) throw std::invalid_argument("dataset has no 'val' split");
  check_main_metric_defined(config, dataset);

  std::vector<std::vector<std::string>> corpus;
  for (const auto* ex : dataset.split(Split::train)) {
    for (const auto& c : ex->captions) corpus.push_back(data::tokenize(c));
  }
  RunState state;
  state.vocab = data::Vocabulary::build(corpus, config.min_count);
  model_config.variant = config.variant;
  model_config.grid_side = dataset.grid_side();
  model_config.feature_dim = dataset.feature_dim();
  model_config.vocab_size = state.vocab.size();
  model_config.validate();
  state.model_config = model_config;
  state.rng = numerics::Rng(config.seed);
  state.params = model::ModelParams::init(model_config, state.rng);
  state.params.set_requires_grad(true);
  return run(config, std::move(state), dataset, on_epoch);
}

TrainOutcome resume(const std::filesystem::path& checkpoint, const data::Dataset& dataset,
                    std::optional<std::size_t> max_epochs, const EpochCallback& on_epoch) {
  auto ckpt = model::read_checkpoint(checkpoint);
  if (ckpt.rng_state.empty() || ckpt.adam.t == 0) {
    throw std::invalid_argument(checkpoint.string() + " holds no optimizer state; resume needs a last.ckpt");
  }
  auto config = ckpt.train_config.get<TrainConfig>();
  if (max_epochs) config.max_epochs = *max_epochs;
  config.checkpoint_dir = checkpoint.parent_path();
  config.validate();
  check_compatible(ckpt.config, dataset);

  RunState state;
  state.model_config = ckpt.config;
  state.vocab = data::Vocabulary::from_words({ckpt.vocab.begin() + model::kNumSpecials, ckpt.vocab.end()});
  state.params = std::move(ckpt.params);
  state.params.set_requires_grad(true);
  state.adam = std::move(ckpt.adam);
  state.rng.set_state(ckpt.rng_state);
  const auto& ts = ckpt.train_state;
  state.epoch = ts.at("epoch").get<std::size_t>();
  state.best_epoch = ts.at("best_epoch").get<std::size_t>();
  state.best_metric = ts.at("best_metric").get<double>();
  state.has_best = ts.at("has_best").get<bool>();
  state.evals_since_best = ts.at("evals_since_best").get<std::size_t>();
  state.stopped = ts.at("stopped").get<bool>();
  state.initial_loss = ts.at("initial_loss").get<double>();
  state.epochs = ts.at("epochs").get<std::vector<json>>();
  if (state.has_best) state.best_params = std::move(ckpt.best_params);
  return run(config, std::move(state), dataset, on_epoch);
}

json outcome_report(const TrainConfig& config, const TrainOutcome& outcome) {
  json j{{"train_config", config},
         {"model_config", outcome.model_config},
         {"vocab_size", outcome.vocab.size()},
         {"initial_loss", outcome.initial_loss},
         {"epochs", outcome.epochs},
         {"best_epoch", outcome.best_epoch},
         {"best_val_metric", outcome.best_metric},
         {"early_stopped", outcome.early_stopped}};
  if (outcome.has_test) j["test"] = to_json(outcome.test);
  return j;
}

}  // namespace relcap::harness
