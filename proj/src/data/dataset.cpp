#include "relcap/data/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace relcap::data {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "' (expected train|val|test)");
}

void FeatureGrid::validate() const {
  if (n == 0 || d == 0) throw std::invalid_argument("FeatureGrid: n and d must be positive");
  if (values.size() != n * n * d) {
    throw std::invalid_argument("FeatureGrid: expected " + std::to_string(n * n * d) + " values for n=" +
                                std::to_string(n) + ", d=" + std::to_string(d) + ", got " +
                                std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureGrid: non-finite feature value");
  }
}

void ExamplePair::validate() const {
  if (id.empty()) throw std::invalid_argument("ExamplePair: empty id");
  src.validate();
  trg.validate();
  if (src.n != trg.n || src.d != trg.d) throw std::invalid_argument("ExamplePair " + id + ": source/target grid mismatch");
  if (captions.empty()) throw std::invalid_argument("ExamplePair " + id + ": no captions");
}

std::vector<const ExamplePair*> Dataset::split(Split s) const {
  std::vector<const ExamplePair*> out;
  for (const auto& ex : examples) {
    if (ex.split == s) out.push_back(&ex);
  }
  return out;
}

const ExamplePair* Dataset::find(std::string_view id) const {
  for (const auto& ex : examples) {
    if (ex.id == id) return &ex;
  }
  return nullptr;
}

std::size_t Dataset::grid_side() const {
  if (examples.empty()) throw std::logic_error("Dataset: empty");
  return examples.front().src.n;
}

std::size_t Dataset::feature_dim() const {
  if (examples.empty()) throw std::logic_error("Dataset: empty");
  return examples.front().src.d;
}

nlohmann::json example_to_json(const ExamplePair& ex) {
  return nlohmann::json{{"id", ex.id},         {"n", ex.src.n},   {"d", ex.src.d},
                        {"src", ex.src.values}, {"trg", ex.trg.values}, {"captions", ex.captions},
                        {"split", std::string(to_string(ex.split))}};
}

ExamplePair example_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
  for (const char* key : {"id", "n", "d", "src", "trg", "captions", "split"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("missing \"") + key + "\" key");
  }
  ExamplePair ex;
  ex.id = j.at("id").get<std::string>();
  const auto n = j.at("n").get<std::size_t>();
  const auto d = j.at("d").get<std::size_t>();
  ex.src = {n, d, j.at("src").get<std::vector<double>>()};
  ex.trg = {n, d, j.at("trg").get<std::vector<double>>()};
  ex.captions = j.at("captions").get<std::vector<std::string>>();
  ex.split = parse_split(j.at("split").get<std::string>());
  ex.validate();
  return ex;
}

std::string dataset_to_string(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples) {
    out += example_to_json(ex).dump();
    out.push_back('\n');
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path.string());
  for (const auto& ex : dataset.examples) out << example_to_json(ex).dump() << '\n';
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path.string());
}

Dataset parse_dataset(std::istream& in) {
  Dataset dataset;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ExamplePair ex;
    try {
      ex = example_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!dataset.examples.empty() && (ex.src.n != dataset.grid_side() || ex.src.d != dataset.feature_dim())) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": grid n=" + std::to_string(ex.src.n) +
                               ", d=" + std::to_string(ex.src.d) + " inconsistent with earlier lines (n=" +
                               std::to_string(dataset.grid_side()) + ", d=" + std::to_string(dataset.feature_dim()) +
                               ")");
    }
    if (!ids.insert(ex.id).second) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
    }
    dataset.examples.push_back(std::move(ex));
  }
  return dataset;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path.string());
  return parse_dataset(in);
}

numerics::Tensor stack_grids(std::span<const ExamplePair* const> batch, bool source) {
  if (batch.empty()) throw std::invalid_argument("stack_grids: empty batch");
  const std::size_t n = batch[0]->src.n, d = batch[0]->src.d;
  std::vector<double> values;
  values.reserve(batch.size() * n * n * d);
  for (const auto* ex : batch) {
    const auto& grid = source ? ex->src : ex->trg;
    if (grid.n != n || grid.d != d) throw std::invalid_argument("stack_grids: mixed grid shapes in batch");
    values.insert(values.end(), grid.values.begin(), grid.values.end());
  }
  return numerics::Tensor({batch.size(), n * n, d}, std::move(values));
}

}  // namespace relcap::data
