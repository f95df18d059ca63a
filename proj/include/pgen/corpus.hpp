#pragma once

// Corpus loading, character vocabulary, and sliding-window pattern extraction.
//
// Text is held as a sequence of Unicode scalar values in logical order. A
// pattern is L consecutive character indices; its target is the character
// that immediately follows it. Consecutive patterns overlap in L-1 positions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pgen {

using CharIndex = std::int32_t;

enum class Normalization { kOff, kOn };

struct CorpusText {
  std::u32string chars;
  std::string source_label;

  std::size_t size() const noexcept { return chars.size(); }
};

/// Line endings to LF; with kOn also NFC and the Persian Yeh/Kaf folding.
std::u32string normalize_text(std::u32string_view text, Normalization mode);

/// Builds a CorpusText from UTF-8 bytes. Throws on invalid UTF-8 or when
/// nothing remains after normalization.
CorpusText make_corpus(std::string_view utf8_bytes, Normalization mode,
                       std::string source_label = {});

CorpusText load_corpus(const std::filesystem::path& path, Normalization mode);

/// a + "\n" + b.
CorpusText merge_corpora(const CorpusText& a, const CorpusText& b);

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Distinct characters of `chars`, indexed in ascending code-point order.
  static Vocabulary from_characters(std::u32string_view chars);

  std::size_t size() const noexcept { return char_of_.size(); }
  bool contains(char32_t c) const { return index_of_.contains(c); }
  std::optional<CharIndex> index_of(char32_t c) const;
  char32_t char_of(CharIndex index) const;
  const std::u32string& characters() const noexcept { return char_of_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.char_of_ == b.char_of_;
  }

 private:
  std::u32string char_of_;
  std::map<char32_t, CharIndex> index_of_;
};

Vocabulary build_vocabulary(const CorpusText& text);

/// Throws kUnknownCharacter naming the character and its position.
std::vector<CharIndex> encode(std::u32string_view text, const Vocabulary& vocab);

/// Throws kIndexOutOfRange.
std::u32string decode(std::span<const CharIndex> indices, const Vocabulary& vocab);

struct WindowConfig {
  std::size_t length = 20;
};

/// All windows of the encoded corpus with stride 1. Windows are views into
/// the shared encoded sequence: window(i) covers positions i..i+L-1 and
/// target(i) is position i+L.
class PatternDataset {
 public:
  PatternDataset() = default;
  PatternDataset(std::vector<CharIndex> encoded, std::size_t window_length,
                 std::size_t vocab_size);

  std::size_t size() const noexcept { return encoded_.size() - window_length_; }
  bool empty() const noexcept { return size() == 0; }
  std::size_t window_length() const noexcept { return window_length_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  std::span<const CharIndex> window(std::size_t i) const {
    return std::span<const CharIndex>(encoded_).subspan(i, window_length_);
  }
  CharIndex target(std::size_t i) const { return encoded_[i + window_length_]; }

  /// Rows [begin, end) as a dataset of their own.
  PatternDataset slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<CharIndex> encoded_;
  std::size_t window_length_ = 0;
  std::size_t vocab_size_ = 0;
};

/// Throws kCorpusTooShort when the corpus is not longer than the window.
PatternDataset extract_patterns(const CorpusText& text, const Vocabulary& vocab,
                                const WindowConfig& cfg);

}  // namespace pgen
