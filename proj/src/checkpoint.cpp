#include "pgen/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <vector>

#include "pgen/error.hpp"

namespace pgen {

namespace {

constexpr std::string_view kMagic = "PGEN";
constexpr std::size_t kHeaderSize = 4 + 1 + 8;

void put_u64(std::string& out, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes) {
  std::uint64_t value = 0;
  for (int i = 7; i >= 0; --i) {
    value = (value << 8) | static_cast<std::uint8_t>(bytes[static_cast<std::size_t>(i)]);
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedManifest, "malformed checkpoint manifest: " + what);
}

template <typename T>
T parse_number(std::string_view text, const std::string& key, int base = 10) {
  T value{};
  std::from_chars_result result;
  if constexpr (std::is_floating_point_v<T>) {
    result = std::from_chars(text.data(), text.data() + text.size(), value);
  } else {
    result = std::from_chars(text.data(), text.data() + text.size(), value, base);
  }
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    malformed("bad value for " + key + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename Params, typename Adam>
auto payload_tensors(Params& params, Adam& adam) {
  using Ref = typename decltype(tensors(params))::value_type;
  std::vector<Ref> out;
  auto append = [&out](const std::string& prefix, auto& p) {
    for (auto& t : tensors(p)) out.push_back(Ref{prefix + t.name, t.values});
  };
  append("params/", params);
  append("adam_m/", adam.m);
  append("adam_v/", adam.v);
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const Checkpoint& c = checkpoint;
  check_params(c.params, c.config);
  check_params(c.adam.m, c.config);
  check_params(c.adam.v, c.config);
  const auto payload = payload_tensors(c.params, c.adam);

  std::ostringstream manifest;
  const NetworkConfig& cfg = c.config;
  manifest << "preset=" << to_string(cfg.preset) << '\n'
           << "cell=" << to_string(cfg.cell) << '\n'
           << "vocab_size=" << cfg.vocab_size << '\n'
           << "hidden1=" << cfg.hidden1 << '\n'
           << "hidden2=" << cfg.hidden2 << '\n'
           << "dense1=" << cfg.dense1 << '\n'
           << "dense2=" << cfg.dense2 << '\n'
           << "dropout=" << format_double(cfg.dropout) << '\n'
           << "window=" << cfg.window_length << '\n'
           << "normalization=" << (c.normalization == Normalization::kOn ? "on" : "off") << '\n';
  manifest << "vocabulary=";
  const auto& chars = c.vocab.characters();
  for (std::size_t i = 0; i < chars.size(); ++i) {
    manifest << (i ? "," : "") << static_cast<std::uint32_t>(chars[i]);
  }
  manifest << '\n'
           << "epoch=" << c.epoch << '\n'
           << "adam_step=" << c.adam.step << '\n'
           << "rng=" << std::hex << c.rng_state[0] << ',' << c.rng_state[1] << ','
           << c.rng_state[2] << ',' << c.rng_state[3] << std::dec << '\n'
           << "tensor_count=" << payload.size() << '\n';
  for (const auto& t : payload) {
    manifest << "tensor=" << t.name << ' ' << t.values.rows() << 'x' << t.values.cols() << '\n';
  }
  const std::string text = manifest.str();

  std::string out;
  out.append(kMagic);
  out.push_back(static_cast<char>(c.format_version));
  put_u64(out, text.size());
  out.append(text);
  for (const auto& t : payload) {
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
        put_u64(out, std::bit_cast<std::uint64_t>(t.values(i, j)));
      }
    }
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kNotACheckpoint, "not a checkpoint (bad magic bytes)");
  }
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::kTruncated, "checkpoint truncated inside header");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != Checkpoint::kFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t manifest_size = get_u64(bytes.substr(5, 8));
  if (manifest_size > bytes.size() - kHeaderSize) {
    throw Error(ErrorCode::kTruncated, "checkpoint truncated inside manifest");
  }
  const std::string_view manifest = bytes.substr(kHeaderSize, manifest_size);
  std::string_view payload = bytes.substr(kHeaderSize + manifest_size);

  std::map<std::string, std::string, std::less<>> fields;
  std::vector<std::pair<std::string, std::string>> tensor_lines;
  for (std::string_view line : split(manifest, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) malformed("line without '=': " + std::string(line));
    const std::string key(line.substr(0, eq));
    const std::string_view value = line.substr(eq + 1);
    if (key == "tensor") {
      const auto space = value.rfind(' ');
      if (space == std::string_view::npos) malformed("tensor line without shape");
      tensor_lines.emplace_back(value.substr(0, space), value.substr(space + 1));
    } else if (!fields.emplace(key, value).second) {
      malformed("duplicate key " + key);
    }
  }
  auto field = [&fields](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) malformed("missing key " + key);
    return it->second;
  };
  auto size_field = [&](const std::string& key) {
    return parse_number<std::size_t>(field(key), key);
  };

  Checkpoint c;
  c.format_version = version;
  try {
    c.config.preset = parse_preset(field("preset"));
    c.config.cell = parse_cell(field("cell"));
  } catch (const Error& e) {
    malformed(e.what());
  }
  c.config.vocab_size = size_field("vocab_size");
  c.config.hidden1 = size_field("hidden1");
  c.config.hidden2 = size_field("hidden2");
  c.config.dense1 = size_field("dense1");
  c.config.dense2 = size_field("dense2");
  c.config.dropout = parse_number<double>(field("dropout"), "dropout");
  c.config.window_length = size_field("window");
  const std::string& normalization = field("normalization");
  if (normalization != "on" && normalization != "off") malformed("normalization");
  c.normalization = normalization == "on" ? Normalization::kOn : Normalization::kOff;
  try {
    c.config.validate();
  } catch (const Error& e) {
    malformed(e.what());
  }

  std::u32string chars;
  for (std::string_view cp : split(field("vocabulary"), ',')) {
    chars.push_back(static_cast<char32_t>(parse_number<std::uint32_t>(cp, "vocabulary")));
  }
  c.vocab = Vocabulary::from_characters(chars);
  if (c.vocab.characters() != chars || c.vocab.size() != c.config.vocab_size) {
    malformed("vocabulary is not a sorted set of vocab_size code points");
  }
  c.epoch = size_field("epoch");
  const auto rng_words = split(field("rng"), ',');
  if (rng_words.size() != 4) malformed("rng needs four words");
  for (std::size_t i = 0; i < 4; ++i) {
    c.rng_state[i] = parse_number<std::uint64_t>(rng_words[i], "rng", 16);
  }

  c.params = zero_params(c.config);
  c.adam = AdamState::zeros(c.config);
  c.adam.step = parse_number<std::uint64_t>(field("adam_step"), "adam_step");
  auto expected = payload_tensors(c.params, c.adam);

  const std::size_t declared = size_field("tensor_count");
  if (declared != tensor_lines.size() || declared != expected.size()) {
    throw Error(ErrorCode::kManifestMismatch,
                "manifest declares " + std::to_string(declared) + " tensors, lists " +
                    std::to_string(tensor_lines.size()) + ", config needs " +
                    std::to_string(expected.size()));
  }
  std::size_t needed = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& t = expected[i];
    const std::string shape = std::to_string(t.values.rows()) + "x" +
                              std::to_string(t.values.cols());
    if (tensor_lines[i].first != t.name || tensor_lines[i].second != shape) {
      throw Error(ErrorCode::kManifestMismatch,
                  "manifest tensor " + tensor_lines[i].first + " " + tensor_lines[i].second +
                      " does not match expected " + t.name + " " + shape);
    }
    needed += static_cast<std::size_t>(t.values.size()) * 8;
  }
  if (payload.size() < needed) {
    throw Error(ErrorCode::kTruncated,
                "checkpoint payload truncated: " + std::to_string(payload.size()) + " of " +
                    std::to_string(needed) + " bytes");
  }
  if (payload.size() > needed) {
    throw Error(ErrorCode::kManifestMismatch, "checkpoint has trailing bytes after tensors");
  }
  for (auto& t : expected) {
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
        const double v = std::bit_cast<double>(get_u64(payload.substr(0, 8)));
        if (!std::isfinite(v)) {
          malformed("non-finite value in tensor " + t.name);
        }
        t.values(i, j) = v;
        payload.remove_prefix(8);
      }
    }
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + temp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw Error(ErrorCode::kIo, "write failed for " + temp.string());
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  return parse_checkpoint(bytes);
}

}  // namespace pgen
