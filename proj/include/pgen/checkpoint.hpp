#pragma once

// Checkpoint file layout:
//
//   "PGEN"                 4 magic bytes
//   0x01                   format version
//   u64 little-endian      manifest length in bytes
//   manifest               UTF-8 key=value lines (config, vocabulary as
//                          decimal code points, one "tensor=<name> <r>x<c>"
//                          line per tensor in payload order)
//   payload                each tensor as little-endian float64, row-major
//
// Tensors are the network parameters followed by the Adam first and second
// moments, prefixed "params/", "adam_m/" and "adam_v/".

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "pgen/corpus.hpp"
#include "pgen/network.hpp"
#include "pgen/rng.hpp"
#include "pgen/trainer.hpp"

namespace pgen {

struct Checkpoint {
  static constexpr std::uint8_t kFormatVersion = 1;

  std::uint8_t format_version = kFormatVersion;
  NetworkConfig config;
  Normalization normalization = Normalization::kOn;
  Vocabulary vocab;
  NetworkParams params;
  AdamState adam;
  std::size_t epoch = 0;
  Rng::State rng_state{};
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws kNotACheckpoint, kUnsupportedVersion, kTruncated, kManifestMismatch
/// or kMalformedManifest.
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes to a sibling temporary file, then renames over `path`.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pgen
