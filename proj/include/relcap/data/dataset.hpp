#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relcap/numerics/tensor.hpp"

namespace relcap::data {

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

// One image's flattened n x n x d feature map, position-major.
struct FeatureGrid {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  std::size_t positions() const { return n * n; }
  std::span<const double> position(std::size_t i) const { return std::span<const double>(values).subspan(i * d, d); }
  void validate() const;

  bool operator==(const FeatureGrid&) const = default;
};

struct ExamplePair {
  std::string id;
  FeatureGrid src;
  FeatureGrid trg;
  std::vector<std::string> captions;  // raw reference text, at least one
  Split split = Split::train;

  void validate() const;
  bool operator==(const ExamplePair&) const = default;
};

struct Dataset {
  std::vector<ExamplePair> examples;

  std::vector<const ExamplePair*> split(Split s) const;
  const ExamplePair* find(std::string_view id) const;
  std::size_t grid_side() const;
  std::size_t feature_dim() const;
  bool operator==(const Dataset&) const = default;
};

nlohmann::json example_to_json(const ExamplePair& ex);
ExamplePair example_from_json(const nlohmann::json& j);

// JSON Lines, one example per line:
//   {"id", "n", "d", "src": [n*n*d numbers], "trg": [...], "captions": [strings], "split"}
// Doubles are printed with round-trip precision, so read(write(x)) == x.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string dataset_to_string(const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in);

// Stacks the source (or target) grids of a batch into a [B, n*n, d] tensor.
numerics::Tensor stack_grids(std::span<const ExamplePair* const> batch, bool source);

}  // namespace relcap::data
