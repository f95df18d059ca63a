#include "pgen/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

#include "pgen/error.hpp"
#include "pgen/utf8.hpp"

namespace pgen {

namespace {

constexpr char32_t kArabicYeh = 0x064A;
constexpr char32_t kPersianYeh = 0x06CC;
constexpr char32_t kArabicKaf = 0x0643;
constexpr char32_t kKeheh = 0x06A9;
constexpr char32_t kByteOrderMark = 0xFEFF;

std::u32string to_nfc(std::u32string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("NFC unavailable: ") + u_errorName(status));
  }
  const icu::UnicodeString source = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(text.data()), static_cast<int32_t>(text.size()));
  const icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("NFC failed: ") + u_errorName(status));
  }
  std::u32string out(static_cast<std::size_t>(normalized.countChar32()), U'\0');
  normalized.toUTF32(reinterpret_cast<UChar32*>(out.data()),
                     static_cast<int32_t>(out.size()), status);
  return out;
}

}  // namespace

std::u32string normalize_text(std::u32string_view text, Normalization mode) {
  std::u32string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == U'\r') {
      out.push_back(U'\n');
      if (i + 1 < text.size() && text[i + 1] == U'\n') ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  if (mode == Normalization::kOff) return out;

  out = to_nfc(out);
  for (char32_t& c : out) {
    if (c == kArabicYeh) c = kPersianYeh;
    else if (c == kArabicKaf) c = kKeheh;
  }
  return out;
}

CorpusText make_corpus(std::string_view utf8_bytes, Normalization mode,
                       std::string source_label) {
  std::u32string decoded = utf8::decode(utf8_bytes);
  if (!decoded.empty() && decoded.front() == kByteOrderMark) decoded.erase(0, 1);
  CorpusText text{normalize_text(decoded, mode), std::move(source_label)};
  if (text.chars.empty()) {
    throw Error(ErrorCode::kEmptyCorpus,
                "corpus '" + text.source_label + "' is empty after normalization");
  }
  return text;
}

CorpusText load_corpus(const std::filesystem::path& path, Normalization mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  try {
    return make_corpus(bytes, mode, path.string());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

CorpusText merge_corpora(const CorpusText& a, const CorpusText& b) {
  if (a.chars.empty() || b.chars.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "cannot merge an empty corpus");
  }
  CorpusText merged;
  merged.chars.reserve(a.size() + b.size() + 1);
  merged.chars = a.chars;
  merged.chars.push_back(U'\n');
  merged.chars += b.chars;
  merged.source_label = a.source_label + "+" + b.source_label;
  return merged;
}

Vocabulary Vocabulary::from_characters(std::u32string_view chars) {
  const std::set<char32_t> distinct(chars.begin(), chars.end());
  Vocabulary v;
  v.char_of_.assign(distinct.begin(), distinct.end());
  for (std::size_t i = 0; i < v.char_of_.size(); ++i) {
    v.index_of_.emplace(v.char_of_[i], static_cast<CharIndex>(i));
  }
  return v;
}

std::optional<CharIndex> Vocabulary::index_of(char32_t c) const {
  const auto it = index_of_.find(c);
  if (it == index_of_.end()) return std::nullopt;
  return it->second;
}

char32_t Vocabulary::char_of(CharIndex index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= char_of_.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "character index " + std::to_string(index) + " outside vocabulary of " +
                    std::to_string(char_of_.size()));
  }
  return char_of_[static_cast<std::size_t>(index)];
}

Vocabulary build_vocabulary(const CorpusText& text) {
  if (text.chars.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty corpus");
  return Vocabulary::from_characters(text.chars);
}

std::vector<CharIndex> encode(std::u32string_view text, const Vocabulary& vocab) {
  std::vector<CharIndex> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto index = vocab.index_of(text[i]);
    if (!index) {
      throw Error(ErrorCode::kUnknownCharacter,
                  "unknown character '" + utf8::encode(text[i]) + "' (" +
                      utf8::codepoint_label(text[i]) + ") at position " +
                      std::to_string(i));
    }
    out.push_back(*index);
  }
  return out;
}

std::u32string decode(std::span<const CharIndex> indices, const Vocabulary& vocab) {
  std::u32string out;
  out.reserve(indices.size());
  for (CharIndex i : indices) out.push_back(vocab.char_of(i));
  return out;
}

PatternDataset::PatternDataset(std::vector<CharIndex> encoded, std::size_t window_length,
                               std::size_t vocab_size)
    : encoded_(std::move(encoded)),
      window_length_(window_length),
      vocab_size_(vocab_size) {
  if (window_length_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window length must be at least 1");
  }
  if (encoded_.size() <= window_length_) {
    throw Error(ErrorCode::kCorpusTooShort,
                "corpus of " + std::to_string(encoded_.size()) +
                    " characters is not longer than the window length " +
                    std::to_string(window_length_));
  }
}

PatternDataset PatternDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "invalid dataset slice");
  }
  std::vector<CharIndex> part(encoded_.begin() + static_cast<std::ptrdiff_t>(begin),
                              encoded_.begin() +
                                  static_cast<std::ptrdiff_t>(end + window_length_));
  return PatternDataset(std::move(part), window_length_, vocab_size_);
}

PatternDataset extract_patterns(const CorpusText& text, const Vocabulary& vocab,
                                const WindowConfig& cfg) {
  return PatternDataset(encode(text.chars, vocab), cfg.length, vocab.size());
}

}  // namespace pgen
