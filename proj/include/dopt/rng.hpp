#pragma once

#include <cstdint>
#include <random>

namespace dopt {

// Deterministic per-agent random streams. Every distribution here is
// hand-rolled on top of mt19937_64 because the standard library's
// distribution objects are not required to produce the same sequences
// across implementations, and runs on different machines must generate
// bit-identical instances.
class Rng {
 public:
  // Derives a stream seed from (global_seed, stream_id) with a splitmix64
  // scramble so per-agent streams are decorrelated even for adjacent ids.
  Rng(std::uint64_t global_seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer on [lo, hi], inclusive, drawn by rejection so the
  // distribution is exact and platform independent.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; the paired draw is cached.
  double normal();
  double normal(double mean, double stddev);

  static std::uint64_t splitmix64(std::uint64_t& state);

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace dopt
