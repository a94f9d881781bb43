#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hiore {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad config file / bad option combination.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed corpus record or annotation-invariant violation.
struct CorpusError : Error {
  using Error::Error;
};

/// Tensor shape or axis mismatch, reported with the offending op name.
struct ShapeError : Error {
  using Error::Error;
};

/// Non-finite value detected during computation.
struct NumericError : Error {
  using Error::Error;
};

/// Archive / file I/O failure, including manifest mismatches.
struct IoError : Error {
  using Error::Error;
};

// Deterministic RNG. mt19937_64 gives a standard-specified stream; the
// derived draws below are implemented here (not via std::distributions)
// so that sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling, unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle with the local uniform_int.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = uniform_int(0, i);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hiore
