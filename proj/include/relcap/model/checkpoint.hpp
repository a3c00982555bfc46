#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "relcap/model/config.hpp"
#include "relcap/model/params.hpp"
#include "relcap/numerics/adam.hpp"

namespace relcap::model {

// Everything needed to evaluate a model or resume its training.
struct Checkpoint {
  ModelConfig config;
  nlohmann::json train_config = nlohmann::json::object();
  std::vector<std::string> vocab;  // token text by id, specials included
  ModelParams params;
  numerics::AdamState adam;
  std::string rng_state;
  nlohmann::json train_state = nlohmann::json::object();
  ModelParams best_params;  // optional; empty when not tracked
};

// Binary container:
//   8 bytes   magic "RELCAPCK"
//   u32 LE    format version (1)
//   u64 LE    header length in bytes
//   header    UTF-8 JSON: config, train_config, vocab, rng_state, train_state,
//             adam_t, and "blocks": [{"group", "name", "shape"}...]
//   payload   each block's values as little-endian IEEE-754 doubles, in order
// Groups are "param", "adam_m", "adam_v" and "best". Values round-trip bit-exactly.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace relcap::model
