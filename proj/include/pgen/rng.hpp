#pragma once

#include <array>
#include <cstdint>

namespace pgen {

/// One step of splitmix64; advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Combines a base seed with a stream index into an independent child seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// xoshiro256** seeded by expanding a 64-bit seed through splitmix64.
///
/// The stream is fully determined by the seed on every platform. The state is
/// single-owner; concurrent users derive child generators via `derive_seed`.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0);

  static Rng from_state(const State& state);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform();

  /// Uniform integer in [0, n) as floor(uniform() * n). `n` must be positive.
  std::size_t uniform_index(std::size_t n);

  const State& state() const noexcept { return s_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  State s_{};
};

}  // namespace pgen
