#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "numerics/tape.hpp"

namespace deflow {

/// Seeded pseudorandom stream. Built on mt19937_64, whose output sequence is
/// fixed by the standard; the uniform and normal transforms are done here, so
/// a stream is reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream named `name` under `root_seed`. Adding a new named
  /// consumer never perturbs existing streams.
  static Rng derive(std::uint64_t root_seed, std::string_view name);
  /// Child stream number `index` of this stream's seed (does not advance this).
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text);

/// i.i.d. standard normal matrix. Zero-sized shapes yield an empty matrix.
Matrix sample_standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Matrix sample_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi);

}  // namespace deflow
