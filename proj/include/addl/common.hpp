#ifndef ADDL_COMMON_HPP_
#define ADDL_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace addl {

// Invalid arguments, shape mismatches, out-of-range parameters.
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated bytes (files, streams, containers).
// `offset` is the byte position at which decoding failed, when known.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? msg + " (byte offset " + std::to_string(offset) + ")"
                                       : msg),
        offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

// Stream was produced with different weights than the decoder loaded.
class ModelMismatchError : public std::runtime_error {
 public:
  explicit ModelMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic PRNG used everywhere randomness matters.  All derived
// distributions are implemented here (not via std::uniform_* whose output
// is implementation-defined), so a seed reproduces bit-identical values on
// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  // xorshift64* core.
  std::uint64_t next_u64() {
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Derive an independent stream (for corpus vs. patches vs. quality draws).
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0xff51afd7ed558ccdull) ^ 0x2545f4914f6cdd1dull);
  }

 private:
  std::uint64_t state_;
};

// Runs fn(i) for i in [0, n).  Each index must write a disjoint slice of the
// output so the result is identical for any thread count.  Honors the
// ADDL_THREADS environment variable; falls back to serial for small jobs.
void parallel_for(int n, const std::function<void(int)>& fn);

// Effective worker count (>= 1).
int thread_count();

}  // namespace addl

#endif  // ADDL_COMMON_HPP_
