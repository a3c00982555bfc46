#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relcap/data/dataset.hpp"
#include "relcap/numerics/rng.hpp"

// Synthetic paired scenes: a grid of cells holding coloured shapes, an edit
// applied to it, and a templated instruction describing the edit.
namespace relcap::data {

enum class ObjectShape { circle, square, triangle };
enum class Color { red, green, blue, yellow, black };
enum class EditKind { add, remove, recolor, move, swap, brighten };

inline constexpr std::size_t kNumShapes = 3;
inline constexpr std::size_t kNumColors = 5;
inline constexpr std::size_t kNumEditKinds = 6;
// One-hot symbols: empty cell plus every shape x color, then a brightness flag.
inline constexpr std::size_t kNumSymbols = 1 + kNumShapes * kNumColors;
inline constexpr std::size_t kEncodingWidth = kNumSymbols + 1;
inline constexpr double kFeatureScale = 4.0;

std::string to_string(ObjectShape s);
std::string to_string(Color c);
std::string to_string(EditKind k);

struct Object {
  ObjectShape shape = ObjectShape::circle;
  Color color = Color::red;

  std::size_t symbol() const;  // 1..15
  bool operator==(const Object&) const = default;
  auto operator<=>(const Object&) const = default;
};

struct SceneSpec {
  std::size_t side = 4;
  std::vector<std::optional<Object>> cells;  // side*side, row-major
  bool bright = false;

  std::size_t object_count() const;
  bool operator==(const SceneSpec&) const = default;
};

struct Edit {
  EditKind kind = EditKind::add;
  std::size_t cell = 0;   // add: target cell; remove/recolor/move/swap: first cell
  std::size_t other = 0;  // move: destination; swap: second cell
  Object object;          // add: the new object
  Color color = Color::red;  // recolor: new colour
};

bool edit_applicable(const SceneSpec& scene, const Edit& edit);
SceneSpec apply_edit(const SceneSpec& scene, const Edit& edit);

// Canonical instruction first, followed by paraphrases (three in total).
std::vector<std::string> caption_templates(const SceneSpec& source, const Edit& edit);

// Every word any template can produce.
std::vector<std::string> template_vocabulary();

// Fixed linear map from a cell's one-hot symbol (plus brightness flag) to a
// d-dimensional feature, shared by source and target images. Entries are
// normal with standard deviation kFeatureScale.
class FeatureProjection {
 public:
  FeatureProjection(std::size_t feature_dim, numerics::Rng& rng);

  std::size_t feature_dim() const { return dim_; }
  std::vector<double> cell_feature(std::size_t symbol, bool bright) const;
  FeatureGrid project(const SceneSpec& scene) const;

 private:
  std::size_t dim_;
  std::vector<double> rows_;  // kEncodingWidth x dim_
};

std::size_t cell_symbol(const std::optional<Object>& cell);

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t count = 1000;
  std::size_t grid_side = 4;
  std::size_t feature_dim = 32;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};  // train, val, test
  double noise = 0.0;         // stddev of Gaussian noise added to features
  std::size_t max_objects = 3;
  // Probability of the canonical template for a training caption; the two
  // paraphrases share the remainder. Val/test keep all three as references.
  double canonical_prob = 0.6;
};

struct SynthRecord {
  SceneSpec source;
  SceneSpec target;
  Edit edit;
};

struct SynthResult {
  Dataset dataset;
  std::vector<SynthRecord> records;  // parallel to dataset.examples
};

// Every caption is recoverable from the two unordered collections of cell
// contents: named objects are unique in their scene, moves happen in
// one-object scenes and swaps in two-object scenes.
SynthResult synth_generate_detailed(const SynthOptions& options);
Dataset synth_generate(const SynthOptions& options);

}  // namespace relcap::data
