#pragma once

#include <cstdint>
#include <vector>

namespace hcd {

// Project-wide PRNG (splitmix64). std:: distributions are avoided everywhere:
// their output is implementation-defined, which would break run reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; consumes two uniforms per draw so the
  // state stays a single u64 (checkpointable without a cached spare).
  double normal();

  // uniform in [0, n); modulo bias is negligible for the n used here
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Fisher-Yates
  void shuffle(std::vector<std::size_t>& v) {
    if (v.empty()) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

// Stateless stream derivation: mixes (seed, a, b) into a fresh seed. Used by
// the dataset generator so every sample is a pure function of (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace hcd
