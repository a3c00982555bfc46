#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

namespace relcap::model {

using TokenId = std::size_t;

// Reserved vocabulary ids.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;

enum class Variant { basic, multihead, static_relational, dynamic_relational };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::dynamic_relational;
  std::size_t grid_side = 4;     // N; each image contributes N*N feature vectors
  std::size_t feature_dim = 32;  // D
  std::size_t hidden_dim = 512;
  std::size_t embed_dim = 256;
  std::size_t vocab_size = kNumSpecials + 1;
  double dropout_rate = 0.5;
  std::size_t max_decode_len = 25;

  std::size_t positions() const { return grid_side * grid_side; }
  void validate() const;  // throws std::invalid_argument
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace relcap::model
