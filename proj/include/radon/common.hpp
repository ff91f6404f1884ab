#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace radon {

// Error taxonomy. Shape/validation errors come from bad tensor arguments,
// config errors from an invalid run setup, io errors from the filesystem.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// ostringstream one-liner: msg("got ", n, " rows")
template <typename... Args>
std::string msg(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

// Deterministic RNG utilities. std::mt19937_64 output is pinned by the
// standard; the helpers below avoid std::uniform_* distributions, whose
// algorithms vary between standard libraries.
using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Combine seed components into one stream seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
  uint64_t h = splitmix64(a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return h;
}

// Unbiased integer in [0, n) by rejection.
inline uint64_t rng_below(Rng& rng, uint64_t n) {
  if (n == 0) throw ValidationError("rng_below: empty range");
  const uint64_t threshold = (0 - n) % n;
  for (;;) {
    const uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

// Uniform in [0, 1) with 24-bit resolution (enough for f32 parameters).
inline float rng_unit_float(Rng& rng) {
  return static_cast<float>(rng() >> 40) * 0x1p-24f;
}

inline double rng_unit_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

template <typename T>
void rng_shuffle(Rng& rng, std::vector<T>& v) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Global worker count for the few loops that parallelize (conv planes).
// 1 keeps everything strictly sequential; results are bit-identical for
// any value because each output plane has exactly one writer.
void set_num_threads(int n);
int num_threads();

// Run fn(i) for i in [0, count). Splits into contiguous chunks when more
// than one thread is configured and the range is worth splitting.
void parallel_for(size_t count, const std::function<void(size_t)>& fn);

}  // namespace radon
