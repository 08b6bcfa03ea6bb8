#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dbc {

// splitmix64 step; used to whiten seeds and derive substream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic random stream. A root seed plus a substream index fully
// determine every draw, so parallel kernels can hand item i its own stream
// and produce output independent of thread count or schedule.
//
// Normals use Box-Muller without the usual cached second value: one draw per
// call, so the stream state never depends on how calls interleave.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    engine_.seed(splitmix64(s));
  }

  // Independent stream derived from the root seed only (not from draws made
  // so far); the same (seed, index) pair always yields the same stream.
  Rng stream(std::uint64_t index) const {
    std::uint64_t s = seed_ ^ (0xd1b54a32d192ed03ull * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return Rng(a ^ (b << 1));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1): 53-bit mantissa, then nudged away
  // from 0 so log() in Box-Muller is always finite.
  double uniform01() {
    const double u = (next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  std::uint64_t root_seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace dbc
