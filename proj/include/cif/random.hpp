#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace cif {

using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

/// Textual engine state; round-trips through rng_from_string exactly.
std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& state);

}  // namespace cif
