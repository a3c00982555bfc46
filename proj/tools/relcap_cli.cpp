// relcap: generate data, train, evaluate, caption and verify relational speakers.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "relcap/data/dataset.hpp"
#include "relcap/data/synth.hpp"
#include "relcap/harness/evaluate.hpp"
#include "relcap/harness/train.hpp"
#include "relcap/harness/verify.hpp"

namespace {

using nlohmann::json;
using namespace relcap;

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

std::string metric_line(const json& m) {
  std::string line;
  for (const char* k : {"bleu1", "bleu4", "rougeL", "cider", "token_accuracy"}) {
    if (!m.contains(k)) continue;
    line += std::string(line.empty() ? "" : "  ") + k + " " + (m[k].is_null() ? "n/a" : fixed(m[k].get<double>()));
  }
  return line;
}

struct GenArgs {
  std::uint64_t seed = 0;
  std::size_t count = 1000;
  std::size_t n = 4;
  std::size_t d = 32;
  std::string out;
  std::vector<double> split{0.8, 0.1, 0.1};
  double noise = 0.0;
  std::size_t max_objects = 3;
};

int gen_data(const GenArgs& a, bool as_json) {
  data::SynthOptions opt;
  opt.seed = a.seed;
  opt.count = a.count;
  opt.grid_side = a.n;
  opt.feature_dim = a.d;
  if (a.split.size() != 3) throw CLI::ValidationError("--split", "expects three ratios train,val,test");
  opt.split_ratios = {a.split[0], a.split[1], a.split[2]};
  opt.noise = a.noise;
  opt.max_objects = a.max_objects;
  const auto dataset = data::synth_generate(opt);
  data::write_dataset(dataset, a.out);
  json meta{{"config",
             {{"seed", opt.seed},
              {"count", opt.count},
              {"n", opt.grid_side},
              {"d", opt.feature_dim},
              {"split", opt.split_ratios},
              {"noise", opt.noise},
              {"max_objects", opt.max_objects},
              {"canonical_prob", opt.canonical_prob}}},
            {"splits",
             {{"train", dataset.split(data::Split::train).size()},
              {"val", dataset.split(data::Split::val).size()},
              {"test", dataset.split(data::Split::test).size()}}}};
  write_json_file(a.out + ".meta.json", meta);
  if (as_json) {
    std::cout << meta.dump() << '\n';
  } else {
    std::cout << "wrote " << dataset.examples.size() << " examples (" << meta["splits"]["train"] << " train / "
              << meta["splits"]["val"] << " val / " << meta["splits"]["test"] << " test) to " << a.out << '\n';
  }
  return 0;
}

struct TrainArgs {
  harness::TrainConfig config;
  model::ModelConfig model;
  std::string variant = "dynamic";
  std::string data;
  std::string out;
  std::string resume;
};

int train(TrainArgs& a, const CLI::App& cmd, bool as_json) {
  const auto dataset = data::read_dataset(a.data);
  auto progress = [&](const json& rec) {
    if (as_json) {
      std::cout << rec.dump() << '\n';
      return;
    }
    std::cout << "epoch " << rec["epoch"] << "  loss " << fixed(rec["train_loss"].get<double>());
    if (rec.contains("val")) {
      std::cout << "  val " << metric_line(rec["val"]) << (rec["improved"].get<bool>() ? "  *" : "");
    }
    std::cout << std::endl;
  };
  harness::TrainOutcome outcome;
  harness::TrainConfig effective;
  if (!a.resume.empty()) {
    std::optional<std::size_t> epochs;
    if (cmd.count("--epochs") > 0) epochs = a.config.max_epochs;
    outcome = harness::resume(a.resume, dataset, epochs, progress);
    effective = outcome.last.train_config.get<harness::TrainConfig>();
  } else {
    if (a.out.empty()) throw CLI::RequiredError("--out");
    a.config.variant = model::parse_variant(a.variant);
    a.config.checkpoint_dir = a.out;
    effective = a.config;
    outcome = harness::train(a.config, a.model, dataset, progress);
  }
  const json report = harness::outcome_report(effective, outcome);
  if (as_json) {
    std::cout << report.dump() << '\n';
  } else {
    std::cout << "best epoch " << outcome.best_epoch << " of " << outcome.epochs
              << (outcome.early_stopped ? " (early stopped)" : "") << ", initial loss "
              << fixed(outcome.initial_loss) << '\n';
    if (outcome.has_test) std::cout << "test  " << metric_line(report["test"]) << '\n';
    std::cout << "artifacts in " << effective.checkpoint_dir.string() << '\n';
  }
  return 0;
}

int evaluate(const std::string& ckpt, const std::string& data_path, const std::string& split_name,
             std::string out, bool as_json) {
  const auto loaded = harness::load_model(ckpt);
  const auto dataset = data::read_dataset(data_path);
  const auto split = data::parse_split(split_name);
  const auto result = harness::evaluate_split(loaded.checkpoint.config, loaded.params(), loaded.vocab, dataset, split);
  json report{{"checkpoint", ckpt},
              {"data", data_path},
              {"model_config", loaded.checkpoint.config},
              {"train_config", loaded.checkpoint.train_config},
              {"metrics", harness::to_json(result)}};
  if (out.empty()) out = (std::filesystem::path(ckpt).parent_path() / ("eval_" + split_name + ".json")).string();
  const auto predictions = std::filesystem::path(out).replace_extension(".predictions.jsonl");
  report["predictions"] = predictions.string();
  write_json_file(out, report);
  harness::write_predictions(result, predictions);
  if (as_json) {
    std::cout << report.dump() << '\n';
  } else {
    std::cout << split_name << " (" << result.metrics.n_examples << " examples)  " << metric_line(report["metrics"])
              << "\nreport " << out << "\npredictions " << predictions.string() << '\n';
  }
  return 0;
}

int caption(const std::string& ckpt, const std::string& data_path, const std::string& id, bool as_json) {
  const auto loaded = harness::load_model(ckpt);
  const auto dataset = data::read_dataset(data_path);
  const auto* example = dataset.find(id);
  if (example == nullptr) throw std::invalid_argument("no example with id '" + id + "' in " + data_path);
  const auto text = harness::caption_example(loaded.checkpoint.config, loaded.params(), loaded.vocab, *example);
  if (as_json) {
    std::cout << json{{"id", id},
                      {"caption", text},
                      {"references", example->captions},
                      {"checkpoint", ckpt},
                      {"model_config", loaded.checkpoint.config}}
                     .dump()
              << '\n';
  } else {
    std::cout << id << ": " << text << '\n';
    for (const auto& r : example->captions) std::cout << "  ref: " << r << '\n';
  }
  return 0;
}

int verify(const harness::VerifyOptions& opt, const std::string& out, bool as_json) {
  const auto report = harness::verify(opt);
  const json j = harness::to_json(report);
  if (!out.empty()) write_json_file(out, j);
  if (as_json) {
    std::cout << j.dump() << '\n';
  } else {
    for (const auto& c : report.checks) {
      std::printf("%-4s %-32s %.3e (limit %.0e)  %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.measure,
                  c.threshold, c.detail.c_str());
    }
    std::printf("%s: %zu checks in %.1f s\n", report.passed() ? "all passed" : "FAILED", report.checks.size(),
                report.seconds);
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational speaker models for image-pair captioning"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Print machine-readable JSON instead of a summary");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic paired-scene dataset (JSON Lines)");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of examples")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Grid side")->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output .jsonl path")->required();
  gen_cmd->add_option("--split", gen.split, "Train,val,test ratios")->delimiter(',')->expected(3);
  gen_cmd->add_option("--noise", gen.noise, "Gaussian feature noise stddev")->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.max_objects, "Most objects in a scene")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a speaker with early stopping on validation");
  train_cmd->add_option("--variant", tr.variant, "basic|multihead|static|dynamic")
      ->check(CLI::IsMember({"basic", "multihead", "static", "dynamic"}))
      ->capture_default_str();
  train_cmd->add_option("--data", tr.data, "Dataset .jsonl")->required();
  train_cmd->add_option("--out", tr.out, "Output directory");
  train_cmd->add_option("--seed", tr.config.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tr.config.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", tr.config.patience, "Evaluations without improvement before stopping")
      ->capture_default_str();
  train_cmd->add_option("--metric", tr.config.main_metric, "Main metric: bleu1..bleu4|rougeL|cider")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.config.eval_every, "Epochs between evaluations")->capture_default_str();
  train_cmd->add_option("--min-count", tr.config.min_count, "Vocabulary frequency cutoff")->capture_default_str();
  train_cmd->add_option("--hidden", tr.model.hidden_dim, "Hidden size")->capture_default_str();
  train_cmd->add_option("--embed", tr.model.embed_dim, "Word embedding size")->capture_default_str();
  train_cmd->add_option("--dropout", tr.model.dropout_rate, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--max-decode-len", tr.model.max_decode_len, "Greedy decoding limit")->capture_default_str();
  train_cmd->add_option("--resume", tr.resume, "Continue from a last.ckpt (--epochs may raise the limit)");

  std::string ckpt, data_path, split = "test", out;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "Dataset .jsonl")->required();
  eval_cmd->add_option("--split", split, "train|val|test")->capture_default_str();
  eval_cmd->add_option("--out", out, "Report path (default: next to the checkpoint)");

  std::string id;
  auto* caption_cmd = app.add_subcommand("caption", "Caption one example");
  caption_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  caption_cmd->add_option("--data", data_path, "Dataset .jsonl")->required();
  caption_cmd->add_option("--id", id, "Example id")->required();

  harness::VerifyOptions vopt;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "Run gradient, oracle and invariance checks");
  verify_cmd->add_option("--n", vopt.grid_side, "Grid side of the check instance")->capture_default_str();
  verify_cmd->add_option("--seed", vopt.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--out", verify_out, "Write the JSON report here");
  verify_cmd->add_option("--inject-fault", vopt.fault_op, "Negate the backward rule of this op (negative control)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen_cmd) return gen_data(gen, as_json);
    if (*train_cmd) return train(tr, *train_cmd, as_json);
    if (*eval_cmd) return evaluate(ckpt, data_path, split, out, as_json);
    if (*caption_cmd) return caption(ckpt, data_path, id, as_json);
    if (*verify_cmd) return verify(vopt, verify_out, as_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
