#include "relcap/model/config.hpp"

#include <stdexcept>
#include <string>

namespace relcap::model {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::basic: return "basic";
    case Variant::multihead: return "multihead";
    case Variant::static_relational: return "static";
    case Variant::dynamic_relational: return "dynamic";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "basic") return Variant::basic;
  if (name == "multihead") return Variant::multihead;
  if (name == "static") return Variant::static_relational;
  if (name == "dynamic") return Variant::dynamic_relational;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "' (expected basic|multihead|static|dynamic)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw std::invalid_argument(std::string("ModelConfig: ") + what + " must be positive");
  };
  positive(grid_side, "grid_side");
  positive(feature_dim, "feature_dim");
  positive(hidden_dim, "hidden_dim");
  positive(embed_dim, "embed_dim");
  positive(max_decode_len, "max_decode_len");
  if (vocab_size < kNumSpecials + 1) {
    throw std::invalid_argument("ModelConfig: vocab_size must be >= 5 (four specials plus a word), got " +
                                std::to_string(vocab_size));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("ModelConfig: dropout_rate must be in [0, 1), got " + std::to_string(dropout_rate));
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"variant", std::string(to_string(c.variant))},
                     {"grid_side", c.grid_side},
                     {"feature_dim", c.feature_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"embed_dim", c.embed_dim},
                     {"vocab_size", c.vocab_size},
                     {"dropout_rate", c.dropout_rate},
                     {"max_decode_len", c.max_decode_len}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.grid_side = j.at("grid_side").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
  c.validate();
}

}  // namespace relcap::model
