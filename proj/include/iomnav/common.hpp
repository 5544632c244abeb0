#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace iomnav {

// All numerics run in double precision; central-difference gradient checks at
// eps=1e-5 are only trustworthy well below float32 round-off.
using real = double;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};
struct NonFiniteError : Error {
  using Error::Error;
};
struct MalformedSceneError : Error {
  using Error::Error;
};
struct GenerationFailedError : Error {
  using Error::Error;
};
struct NotOneHotError : Error {
  using Error::Error;
};
struct EmptyMemoryError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic generator with explicit stream derivation. Distribution code is
// written out so sequences are identical on every platform and standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) {
    s_[0] = splitmix64(seed ^ (stream * 0xA24BAED4963EE407ULL));
    s_[1] = splitmix64(s_[0]);
    s_[2] = splitmix64(s_[1]);
    s_[3] = splitmix64(s_[2]);
  }

  uint64_t next_u64() {  // xoshiro256**
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int randint(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    // Box-Muller, fresh pair each call
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace iomnav
