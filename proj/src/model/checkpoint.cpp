#include "relcap/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace relcap::model {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'E', 'L', 'C', 'A', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct Block {
  std::string group;
  std::string name;
  numerics::Shape shape;
  const double* data = nullptr;
};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<Block> blocks;
  const auto& entries = ckpt.params.entries();
  for (const auto& e : entries) blocks.push_back({"param", e.name, e.tensor.shape(), e.tensor.values().data()});
  if (!ckpt.adam.m.empty()) {
    if (ckpt.adam.m.size() != entries.size() || ckpt.adam.v.size() != entries.size()) {
      throw std::invalid_argument("checkpoint: optimizer state does not match parameter list");
    }
    for (std::size_t k = 0; k < entries.size(); ++k) {
      blocks.push_back({"adam_m", entries[k].name, entries[k].tensor.shape(), ckpt.adam.m[k].data()});
    }
    for (std::size_t k = 0; k < entries.size(); ++k) {
      blocks.push_back({"adam_v", entries[k].name, entries[k].tensor.shape(), ckpt.adam.v[k].data()});
    }
  }
  for (const auto& e : ckpt.best_params.entries()) {
    blocks.push_back({"best", e.name, e.tensor.shape(), e.tensor.values().data()});
  }

  nlohmann::json header;
  header["format"] = "relcap-checkpoint";
  header["config"] = ckpt.config;
  header["train_config"] = ckpt.train_config;
  header["vocab"] = ckpt.vocab;
  header["rng_state"] = ckpt.rng_state;
  header["train_state"] = ckpt.train_state;
  header["adam_t"] = ckpt.adam.t;
  auto& list = header["blocks"] = nlohmann::json::array();
  for (const auto& b : blocks) list.push_back({{"group", b.group}, {"name", b.name}, {"shape", b.shape}});
  const std::string text = header.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& b : blocks) {
      out.write(reinterpret_cast<const char*>(b.data), static_cast<std::streamsize>(numerics::numel(b.shape) * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a relcap checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto length = read_pod<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.config = header.at("config").get<ModelConfig>();
  ckpt.train_config = header.at("train_config");
  ckpt.vocab = header.at("vocab").get<std::vector<std::string>>();
  ckpt.rng_state = header.at("rng_state").get<std::string>();
  ckpt.train_state = header.at("train_state");
  ckpt.adam.t = header.at("adam_t").get<std::int64_t>();

  for (const auto& b : header.at("blocks")) {
    const auto group = b.at("group").get<std::string>();
    const auto name = b.at("name").get<std::string>();
    auto shape = b.at("shape").get<numerics::Shape>();
    std::vector<double> values(numerics::numel(shape));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in block " + group + "/" + name);
    if (group == "param") {
      ckpt.params.add(name, numerics::Tensor(std::move(shape), std::move(values), true));
    } else if (group == "adam_m") {
      ckpt.adam.m.push_back(std::move(values));
    } else if (group == "adam_v") {
      ckpt.adam.v.push_back(std::move(values));
    } else if (group == "best") {
      ckpt.best_params.add(name, numerics::Tensor(std::move(shape), std::move(values), false));
    } else {
      throw std::runtime_error("checkpoint: unknown block group '" + group + "'");
    }
  }

  const auto specs = param_specs(ckpt.config);
  if (specs.size() != ckpt.params.entries().size()) {
    throw std::runtime_error("checkpoint: parameter set does not match the stored config");
  }
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& e = ckpt.params.entries()[k];
    if (e.name != specs[k].name || e.tensor.shape() != specs[k].shape) {
      throw std::runtime_error("checkpoint: parameter '" + e.name + "' does not match the stored config");
    }
  }
  return ckpt;
}

}  // namespace relcap::model
