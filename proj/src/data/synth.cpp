#include "relcap/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "relcap/data/tokenize.hpp"

namespace relcap::data {

std::string to_string(ObjectShape s) {
  switch (s) {
    case ObjectShape::circle: return "circle";
    case ObjectShape::square: return "square";
    case ObjectShape::triangle: return "triangle";
  }
  return "?";
}

std::string to_string(Color c) {
  switch (c) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::yellow: return "yellow";
    case Color::black: return "black";
  }
  return "?";
}

std::string to_string(EditKind k) {
  switch (k) {
    case EditKind::add: return "add";
    case EditKind::remove: return "remove";
    case EditKind::recolor: return "recolor";
    case EditKind::move: return "move";
    case EditKind::swap: return "swap";
    case EditKind::brighten: return "brighten";
  }
  return "?";
}

std::size_t Object::symbol() const {
  return 1 + static_cast<std::size_t>(shape) * kNumColors + static_cast<std::size_t>(color);
}

std::size_t cell_symbol(const std::optional<Object>& cell) { return cell ? cell->symbol() : 0; }

std::size_t SceneSpec::object_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
}

bool edit_applicable(const SceneSpec& scene, const Edit& edit) {
  const std::size_t n = scene.cells.size();
  auto occupied = [&](std::size_t i) { return i < n && scene.cells[i].has_value(); };
  auto empty = [&](std::size_t i) { return i < n && !scene.cells[i].has_value(); };
  switch (edit.kind) {
    case EditKind::add: return empty(edit.cell);
    case EditKind::remove: return occupied(edit.cell);
    case EditKind::recolor: return occupied(edit.cell) && scene.cells[edit.cell]->color != edit.color;
    case EditKind::move: return occupied(edit.cell) && empty(edit.other);
    case EditKind::swap:
      return occupied(edit.cell) && occupied(edit.other) && *scene.cells[edit.cell] != *scene.cells[edit.other];
    case EditKind::brighten: return !scene.bright;
  }
  return false;
}

SceneSpec apply_edit(const SceneSpec& scene, const Edit& edit) {
  if (!edit_applicable(scene, edit)) throw std::invalid_argument("apply_edit: " + to_string(edit.kind) + " not applicable");
  SceneSpec out = scene;
  switch (edit.kind) {
    case EditKind::add: out.cells[edit.cell] = edit.object; break;
    case EditKind::remove: out.cells[edit.cell].reset(); break;
    case EditKind::recolor: out.cells[edit.cell]->color = edit.color; break;
    case EditKind::move: std::swap(out.cells[edit.cell], out.cells[edit.other]); break;
    case EditKind::swap: std::swap(out.cells[edit.cell], out.cells[edit.other]); break;
    case EditKind::brighten: out.bright = true; break;
  }
  return out;
}

namespace {

std::string noun(const Object& o) { return to_string(o.color) + " " + to_string(o.shape); }

std::vector<std::string> templates_for(EditKind kind, const Object& a, const Object& b, Color new_color) {
  const std::string x = noun(a), c2 = to_string(new_color);
  switch (kind) {
    case EditKind::add: return {"add a " + x, "put a " + x + " in the image", "insert a " + x};
    case EditKind::remove: return {"remove the " + x, "delete the " + x, "take out the " + x};
    case EditKind::recolor:
      return {"change the " + x + " to " + c2, "make the " + x + " " + c2, "paint the " + x + " " + c2};
    case EditKind::move: return {"move the " + x, "shift the " + x, "put the " + x + " somewhere else"};
    case EditKind::swap: {
      const std::string y = noun(b);
      return {"swap the " + x + " and the " + y, "exchange the " + x + " and the " + y,
              "switch the " + x + " with the " + y};
    }
    case EditKind::brighten: return {"brighten the image", "make the image brighter", "increase the brightness"};
  }
  return {};
}

}  // namespace

std::vector<std::string> caption_templates(const SceneSpec& source, const Edit& edit) {
  if (!edit_applicable(source, edit)) throw std::invalid_argument("caption_templates: edit not applicable");
  switch (edit.kind) {
    case EditKind::add: return templates_for(edit.kind, edit.object, edit.object, edit.color);
    case EditKind::swap: {
      // Objects are named in a fixed attribute order, independent of position.
      auto first = *source.cells[edit.cell], second = *source.cells[edit.other];
      if (second < first) std::swap(first, second);
      return templates_for(edit.kind, first, second, edit.color);
    }
    case EditKind::brighten: return templates_for(edit.kind, Object{}, Object{}, edit.color);
    default: return templates_for(edit.kind, *source.cells[edit.cell], *source.cells[edit.cell], edit.color);
  }
}

std::vector<std::string> template_vocabulary() {
  std::set<std::string> words;
  std::vector<Object> objects;
  for (std::size_t s = 0; s < kNumShapes; ++s) {
    for (std::size_t c = 0; c < kNumColors; ++c) objects.push_back({static_cast<ObjectShape>(s), static_cast<Color>(c)});
  }
  for (std::size_t k = 0; k < kNumEditKinds; ++k) {
    for (const auto& a : objects) {
      for (const auto& b : objects) {
        for (std::size_t c = 0; c < kNumColors; ++c) {
          for (const auto& sentence : templates_for(static_cast<EditKind>(k), a, b, static_cast<Color>(c))) {
            for (auto& w : tokenize(sentence)) words.insert(std::move(w));
          }
        }
      }
    }
  }
  return {words.begin(), words.end()};
}

FeatureProjection::FeatureProjection(std::size_t feature_dim, numerics::Rng& rng)
    : dim_(feature_dim), rows_(kEncodingWidth * feature_dim) {
  if (feature_dim == 0) throw std::invalid_argument("FeatureProjection: feature_dim must be positive");
  for (double& x : rows_) x = rng.normal() * kFeatureScale;
}

std::vector<double> FeatureProjection::cell_feature(std::size_t symbol, bool bright) const {
  if (symbol >= kNumSymbols) throw std::out_of_range("FeatureProjection: symbol out of range");
  std::vector<double> f(rows_.begin() + static_cast<std::ptrdiff_t>(symbol * dim_),
                        rows_.begin() + static_cast<std::ptrdiff_t>((symbol + 1) * dim_));
  if (bright) {
    for (std::size_t k = 0; k < dim_; ++k) f[k] += rows_[kNumSymbols * dim_ + k];
  }
  return f;
}

FeatureGrid FeatureProjection::project(const SceneSpec& scene) const {
  FeatureGrid grid{scene.side, dim_, {}};
  grid.values.reserve(scene.cells.size() * dim_);
  for (const auto& cell : scene.cells) {
    const auto f = cell_feature(cell_symbol(cell), scene.bright);
    grid.values.insert(grid.values.end(), f.begin(), f.end());
  }
  return grid;
}

namespace {

struct CountRange {
  std::size_t lo;
  std::size_t hi;
};

// Object counts for which a scene can support the edit kind. Move and swap
// leave the multiset of cell contents unchanged, so their operands are only
// recoverable without positions when the scene holds exactly those objects.
CountRange count_range(EditKind kind, std::size_t cells, std::size_t max_objects) {
  const std::size_t cap = std::min(max_objects, cells);
  switch (kind) {
    case EditKind::add: return {0, std::min(max_objects, cells - 1)};
    case EditKind::remove:
    case EditKind::recolor: return {1, cap};
    case EditKind::move: return {1, cells >= 2 ? std::min<std::size_t>(1, max_objects) : 0};
    case EditKind::swap: return {2, std::min<std::size_t>(2, cap)};
    case EditKind::brighten: return {0, cap};
  }
  return {1, 0};
}

Object random_object(numerics::Rng& rng) {
  return {static_cast<ObjectShape>(rng.below(kNumShapes)), static_cast<Color>(rng.below(kNumColors))};
}

SceneSpec random_scene(std::size_t side, std::size_t objects, numerics::Rng& rng) {
  SceneSpec scene{side, std::vector<std::optional<Object>>(side * side), false};
  std::vector<std::size_t> order(side * side);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t k = 0; k < objects; ++k) scene.cells[order[k]] = random_object(rng);
  return scene;
}

template <class Pred>
std::vector<std::size_t> cells_where(const SceneSpec& scene, Pred pred) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scene.cells.size(); ++i) {
    if (pred(scene.cells[i])) out.push_back(i);
  }
  return out;
}

std::size_t occurrences(const SceneSpec& scene, const Object& object) {
  return static_cast<std::size_t>(
      std::count_if(scene.cells.begin(), scene.cells.end(), [&](const auto& c) { return c && *c == object; }));
}

// The caption names objects that are unique on both sides: an added object
// is new to the scene, removed and recoloured objects occur once, and a
// recolour never produces a duplicate.
std::optional<Edit> random_edit(const SceneSpec& scene, EditKind kind, numerics::Rng& rng) {
  const auto unique = cells_where(scene, [&](const auto& c) { return c && occurrences(scene, *c) == 1; });
  const auto vacant = cells_where(scene, [](const auto& c) { return !c.has_value(); });
  auto pick = [&](const auto& from) { return from[rng.below(from.size())]; };
  Edit edit;
  edit.kind = kind;
  switch (kind) {
    case EditKind::add: {
      std::vector<Object> absent;
      for (std::size_t s = 0; s < kNumShapes; ++s) {
        for (std::size_t c = 0; c < kNumColors; ++c) {
          const Object o{static_cast<ObjectShape>(s), static_cast<Color>(c)};
          if (occurrences(scene, o) == 0) absent.push_back(o);
        }
      }
      if (vacant.empty() || absent.empty()) return std::nullopt;
      edit.cell = pick(vacant);
      edit.object = pick(absent);
      break;
    }
    case EditKind::remove:
      if (unique.empty()) return std::nullopt;
      edit.cell = pick(unique);
      break;
    case EditKind::recolor: {
      if (unique.empty()) return std::nullopt;
      edit.cell = pick(unique);
      const Object old = *scene.cells[edit.cell];
      std::vector<Color> colors;
      for (std::size_t c = 0; c < kNumColors; ++c) {
        const auto color = static_cast<Color>(c);
        if (color != old.color && occurrences(scene, Object{old.shape, color}) == 0) colors.push_back(color);
      }
      if (colors.empty()) return std::nullopt;
      edit.color = pick(colors);
      break;
    }
    case EditKind::move:
      if (unique.empty() || vacant.empty()) return std::nullopt;
      edit.cell = pick(unique);
      edit.other = pick(vacant);
      break;
    case EditKind::swap: {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t a = 0; a < unique.size(); ++a) {
        for (std::size_t b = a + 1; b < unique.size(); ++b) pairs.emplace_back(unique[a], unique[b]);
      }
      if (pairs.empty()) return std::nullopt;
      std::tie(edit.cell, edit.other) = pick(pairs);
      break;
    }
    case EditKind::brighten:
      if (scene.bright) return std::nullopt;
      break;
  }
  return edit;
}

}  // namespace

SynthResult synth_generate_detailed(const SynthOptions& options) {
  if (options.grid_side == 0 || options.feature_dim == 0) {
    throw std::invalid_argument("synth_generate: grid_side and feature_dim must be positive");
  }
  double total = 0.0;
  for (double r : options.split_ratios) {
    if (!(r >= 0.0)) throw std::invalid_argument("synth_generate: split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("synth_generate: split ratios sum to " + std::to_string(total) + ", expected 1");
  }
  if (options.noise < 0.0) throw std::invalid_argument("synth_generate: noise must be non-negative");
  if (!(options.canonical_prob >= 0.0 && options.canonical_prob <= 1.0)) {
    throw std::invalid_argument("synth_generate: canonical_prob must be in [0, 1]");
  }

  const std::size_t cells = options.grid_side * options.grid_side;
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(options.count) * options.split_ratios[0]));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(options.count) * options.split_ratios[1]));
  if (n_train + n_val > options.count) throw std::invalid_argument("synth_generate: split sizes exceed count");

  std::vector<EditKind> kinds;
  for (std::size_t k = 0; k < kNumEditKinds; ++k) {
    const auto kind = static_cast<EditKind>(k);
    const auto range = count_range(kind, cells, options.max_objects);
    if (range.lo <= range.hi) kinds.push_back(kind);
  }

  numerics::Rng rng(options.seed);
  const FeatureProjection projection(options.feature_dim, rng);

  SynthResult result;
  result.dataset.examples.reserve(options.count);
  result.records.reserve(options.count);
  for (std::size_t index = 0; index < options.count; ++index) {
    const EditKind kind = kinds[rng.below(kinds.size())];
    const auto range = count_range(kind, cells, options.max_objects);
    SceneSpec source;
    std::optional<Edit> edit;
    for (int attempt = 0; attempt < 1000 && !edit; ++attempt) {
      source = random_scene(options.grid_side, range.lo + rng.below(range.hi - range.lo + 1), rng);
      edit = random_edit(source, kind, rng);
    }
    if (!edit) throw std::runtime_error("synth_generate: could not sample a scene for " + to_string(kind));
    SceneSpec target = apply_edit(source, *edit);

    ExamplePair ex;
    char id[32];
    std::snprintf(id, sizeof(id), "ex%06zu", index);
    ex.id = id;
    ex.split = index < n_train ? Split::train : index < n_train + n_val ? Split::val : Split::test;
    ex.src = projection.project(source);
    ex.trg = projection.project(target);
    if (options.noise > 0.0) {
      for (double& v : ex.src.values) v += options.noise * rng.normal();
      for (double& v : ex.trg.values) v += options.noise * rng.normal();
    }
    auto captions = caption_templates(source, *edit);
    if (ex.split == Split::train) {
      const double u = rng.uniform();
      const double p = options.canonical_prob;
      const std::size_t choice = u < p ? 0 : (u < p + (1.0 - p) / 2.0 ? 1 : 2);
      ex.captions = {captions[choice]};
    } else {
      ex.captions = std::move(captions);
    }
    result.dataset.examples.push_back(std::move(ex));
    result.records.push_back({std::move(source), std::move(target), *edit});
  }
  return result;
}

Dataset synth_generate(const SynthOptions& options) { return synth_generate_detailed(options).dataset; }

}  // namespace relcap::data
