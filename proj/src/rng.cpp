#include "hcd/rng.hpp"

#include <cmath>

namespace hcd {

double Rng::normal() {
  // u1 in (0,1] so the log is finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto fin = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = fin(seed + 0x9e3779b97f4a7c15ULL);
  h = fin(h ^ (a + 0x9e3779b97f4a7c15ULL));
  h = fin(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace hcd
