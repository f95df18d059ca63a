#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pgen/corpus.hpp"
#include "pgen/network.hpp"

namespace pgen {

enum class DecodeMode { kGreedy, kTemperature };

struct GenerationRequest {
  std::u32string seed;
  std::size_t limit = 200;
  DecodeMode mode = DecodeMode::kTemperature;
  double temperature = 0.8;
  std::uint64_t rng_seed = 0;
};

struct GenerationResult {
  std::u32string text;       // exactly `limit` characters
  std::u32string seed_used;  // the window the first prediction consumed
};

/// Last L characters of the seed, or the seed left-padded with spaces when
/// shorter. Throws on an empty seed, an unknown character, or a missing space.
std::vector<CharIndex> prepare_seed(std::u32string_view seed, const Vocabulary& vocab,
                                    std::size_t window_length);

/// softmax(log p / tau) with p floored at 1e-300.
Vector apply_temperature(const Vector& probs, double temperature);

/// Predict, append, shift, `limit` times.
GenerationResult generate(const NetworkParams& params, const NetworkConfig& config,
                          const Vocabulary& vocab, const GenerationRequest& request);

}  // namespace pgen
