#include "pgen/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "pgen/error.hpp"
#include "pgen/utf8.hpp"

namespace pgen {

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out.flush()) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::map<std::u32string, double> kept_counts(const FrequencyTable& t, std::size_t top_k) {
  std::map<std::u32string, double> kept;
  for (auto& [token, count] : top_tokens(t, top_k)) kept.emplace(token, double(count));
  return kept;
}

}  // namespace

std::size_t FrequencyTable::total() const {
  std::size_t n = 0;
  for (const auto& [token, count] : counts) n += count;
  return n;
}

FrequencyTable word_frequencies(std::u32string_view text) {
  FrequencyTable table;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && utf8::is_whitespace(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !utf8::is_whitespace(text[i])) ++i;
    if (i > start) ++table.counts[std::u32string(text.substr(start, i - start))];
  }
  return table;
}

RankedTokens top_tokens(const FrequencyTable& table, std::size_t top_k) {
  RankedTokens ranked(table.counts.begin(), table.counts.end());
  // counts is already in code-point order, so a stable sort keeps that for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

SimilarityReport compare_frequencies(const FrequencyTable& a, const FrequencyTable& b,
                                     std::size_t top_k) {
  if (top_k == 0) throw Error(ErrorCode::kInvalidArgument, "top_k must be at least 1");
  const auto ka = kept_counts(a, top_k);
  const auto kb = kept_counts(b, top_k);

  std::set<std::u32string> keys;
  for (const auto& [token, count] : ka) keys.insert(token);
  for (const auto& [token, count] : kb) keys.insert(token);

  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  SimilarityReport report;
  report.top_k = top_k;
  for (const auto& key : keys) {
    const auto ia = ka.find(key);
    const auto ib = kb.find(key);
    const double va = ia == ka.end() ? 0.0 : ia->second;
    const double vb = ib == kb.end() ? 0.0 : ib->second;
    dot += va * vb;
    norm_a += va * va;
    norm_b += vb * vb;
    if (va > 0.0 && vb > 0.0) ++report.shared_tokens;
  }
  if (norm_a > 0.0 && norm_b > 0.0) {
    report.cosine = std::clamp(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)), 0.0, 1.0);
  }
  return report;
}

std::string format_learning_curve(const LearningCurve& curve) {
  if (curve.empty()) throw Error(ErrorCode::kInvalidArgument, "empty learning curve");
  std::string out = "epoch,loss,accuracy,seconds\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const EpochReport& r = curve[i];
    if (i > 0 && r.epoch_index <= curve[i - 1].epoch_index) {
      throw Error(ErrorCode::kInvalidArgument,
                  "learning curve epochs must be strictly increasing (" +
                      std::to_string(curve[i - 1].epoch_index) + " then " +
                      std::to_string(r.epoch_index) + ")");
    }
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", r.epoch_index, r.mean_loss,
                  r.accuracy, r.wall_seconds);
    out += line;
  }
  return out;
}

LearningCurve parse_learning_curve(std::string_view csv) {
  auto fail = [](const std::string& what) -> void {
    throw Error(ErrorCode::kInvalidArgument, "bad learning curve CSV: " + what);
  };
  LearningCurve curve;
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (header) {
      if (line != "epoch,loss,accuracy,seconds") fail("missing header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    EpochReport r;
    const char* p = line.data();
    const char* last = line.data() + line.size();
    auto field = [&](auto& value, bool final_field) {
      const auto res = std::from_chars(p, last, value);
      if (res.ec != std::errc()) fail(std::string(line));
      p = res.ptr;
      if (!final_field) {
        if (p == last || *p != ',') fail(std::string(line));
        ++p;
      }
    };
    field(r.epoch_index, false);
    field(r.mean_loss, false);
    field(r.accuracy, false);
    field(r.wall_seconds, true);
    if (p != last) fail(std::string(line));
    curve.push_back(r);
  }
  if (header) fail("missing header");
  return curve;
}

void emit_learning_curve(const LearningCurve& curve, const std::filesystem::path& path) {
  write_file(path, format_learning_curve(curve));
}

std::string format_frequency_table(const FrequencyTable& table, std::size_t top_k) {
  if (top_k == 0) throw Error(ErrorCode::kInvalidArgument, "top_k must be at least 1");
  std::string out;
  for (const auto& [token, count] : top_tokens(table, top_k)) {
    out += utf8::encode(token);
    out += '\t';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

void emit_frequency_table(const FrequencyTable& table, std::size_t top_k,
                          const std::filesystem::path& path) {
  write_file(path, format_frequency_table(table, top_k));
}

}  // namespace pgen
