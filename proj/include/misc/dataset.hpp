#pragma once

// Generated training pairs. Layout under the output directory:
//   manifest.txt         one record per line: id=.. sharp=.. blurred=.. length=.. angle=.. sigma=.. seed=..
//   sharp/<id>.png
//   blurred/<id>.png
// Records with fnv1a64(id) % 10 == 0 form the validation split.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "misc/blur.hpp"

namespace misc::data {

struct ManifestEntry {
  std::string id;
  std::string sharp;    // relative to the manifest directory
  std::string blurred;
  double length = 1;
  double angle = 0;
  double sigma = 0;
  std::uint64_t seed = 0;

  bool validation() const;
};

struct SynthOptions {
  std::filesystem::path source_dir;  // empty: procedural images only
  int count = 200;
  int patch = 64;
  double min_length = 1;
  double max_length = 9;
  double min_sigma = 0.01;
  double max_sigma = 0.01;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};

struct SynthReport {
  std::vector<ManifestEntry> entries;
  int skipped_sources = 0;  // unreadable or smaller than the blur window
};

// Deterministic in (options, source images). Writes PNG pairs and the manifest.
SynthReport generate_dataset(const SynthOptions& options);

std::string format_manifest_line(const ManifestEntry& e);
// Throws IoError naming the line on malformed records.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct Sample {
  std::string id;
  Tensor sharp;
  Tensor blurred;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

// Loads every pair listed in the manifest at `manifest_path`.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Flips and 90-degree rotations; code in [0, 8): bit 0 horizontal flip,
// bit 1 vertical flip, bit 2 transpose. Square images only when bit 2 is set.
Tensor augment(const Tensor& image, int code);

}  // namespace misc::data
