#include "pgen/generator.hpp"

#include <cmath>

#include "pgen/error.hpp"
#include "pgen/trainer.hpp"

namespace pgen {

std::vector<CharIndex> prepare_seed(std::u32string_view seed, const Vocabulary& vocab,
                                    std::size_t window_length) {
  if (seed.empty()) throw Error(ErrorCode::kInvalidArgument, "seed text is empty");
  std::vector<CharIndex> encoded = encode(seed, vocab);
  if (encoded.size() >= window_length) {
    encoded.erase(encoded.begin(),
                  encoded.end() - static_cast<std::ptrdiff_t>(window_length));
    return encoded;
  }
  const auto space = vocab.index_of(U' ');
  if (!space) {
    throw Error(ErrorCode::kUnknownCharacter,
                "seed shorter than the window needs space padding, but the vocabulary "
                "has no space character");
  }
  std::vector<CharIndex> padded(window_length - encoded.size(), *space);
  padded.insert(padded.end(), encoded.begin(), encoded.end());
  return padded;
}

Vector apply_temperature(const Vector& probs, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  Vector logits(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    logits(i) = std::log(std::max(probs(i), kProbabilityFloor)) / temperature;
  }
  return softmax(logits);
}

GenerationResult generate(const NetworkParams& params, const NetworkConfig& config,
                          const Vocabulary& vocab, const GenerationRequest& request) {
  if (vocab.size() != config.vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch, "vocabulary does not match network config");
  }
  if (request.mode == DecodeMode::kTemperature && !(request.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  std::vector<CharIndex> window = prepare_seed(request.seed, vocab, config.window_length);
  GenerationResult result;
  result.seed_used = decode(window, vocab);
  result.text.reserve(request.limit);

  Rng rng(request.rng_seed);
  for (std::size_t step = 0; step < request.limit; ++step) {
    const Vector probs = predict(params, config, window);
    const auto next = static_cast<CharIndex>(
        request.mode == DecodeMode::kGreedy
            ? argmax(probs)
            : sample_categorical(apply_temperature(probs, request.temperature), rng));
    result.text.push_back(vocab.char_of(next));
    window.erase(window.begin());
    window.push_back(next);
  }
  return result;
}

}  // namespace pgen
