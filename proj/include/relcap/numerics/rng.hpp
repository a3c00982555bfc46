#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace relcap::numerics {

// Seeded random source used everywhere randomness enters (init, dropout,
// shuffling, synthetic data).
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// All conversions below are done by hand because <random> distributions and
// std::shuffle are implementation-defined:
//   uniform()  = (next >> 11) * 2^-53            in [0, 1)
//   normal()   = Box-Muller on two uniforms, cosine branch only
//   below(n)   = rejection sampling on the top of the 64-bit range
//   shuffle    = Fisher-Yates from the back using below()
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }

  // Textual engine state; set_state(state()) restores the exact stream position.
  std::string state() const;
  void set_state(const std::string& text);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace relcap::numerics
