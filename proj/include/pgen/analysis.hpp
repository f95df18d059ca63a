#pragma once

// Learning curves and word-frequency comparison between real and generated
// text. Tokens are maximal runs of non-whitespace characters.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pgen/trainer.hpp"

namespace pgen {

struct FrequencyTable {
  std::map<std::u32string, std::size_t> counts;

  std::size_t total() const;
};

using RankedTokens = std::vector<std::pair<std::u32string, std::size_t>>;

FrequencyTable word_frequencies(std::u32string_view text);

/// Descending count, ties by code-point order, at most `top_k` entries.
RankedTokens top_tokens(const FrequencyTable& table, std::size_t top_k);

struct SimilarityReport {
  double cosine = 0.0;
  std::size_t top_k = 0;
  std::size_t shared_tokens = 0;
};

/// Cosine similarity of the two count vectors, each restricted to its own
/// top_k tokens, over the union of kept tokens.
SimilarityReport compare_frequencies(const FrequencyTable& a, const FrequencyTable& b,
                                     std::size_t top_k);

using LearningCurve = std::vector<EpochReport>;

std::string format_learning_curve(const LearningCurve& curve);
LearningCurve parse_learning_curve(std::string_view csv);
void emit_learning_curve(const LearningCurve& curve, const std::filesystem::path& path);

std::string format_frequency_table(const FrequencyTable& table, std::size_t top_k);
void emit_frequency_table(const FrequencyTable& table, std::size_t top_k,
                          const std::filesystem::path& path);

}  // namespace pgen
