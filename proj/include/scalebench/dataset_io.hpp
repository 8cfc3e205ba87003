#pragma once

// On-disk datasets and the pretraining tiler.
//
// Classification layout:   root/<class>/<file>.png  plus  root/<split>.txt
//                          listing "<class>/<file>.png" one per line.
// Bitemporal layout:       root/<split>/{A,B,label}/<stem>.png

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalebench/image.hpp"

namespace scalebench {

enum class DatasetKind { classification, bitemporal };
enum class Split { train, val, test };

std::string_view to_string(DatasetKind k);
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct DatasetItem {
  std::vector<std::filesystem::path> images;  // one, or two for bitemporal
  std::optional<int> label;                   // classification
  std::filesystem::path mask;                 // bitemporal
};

struct DatasetManifest {
  DatasetKind kind = DatasetKind::classification;
  std::filesystem::path root;
  Split split = Split::train;
  std::vector<DatasetItem> items;
  std::vector<std::string> class_names;  // classification only, index = id
  std::string resolution_note;

  nlohmann::json to_json() const;
};

/// Class ids follow sorted class-directory names. Throws ConfigError on an
/// empty split, a class that has no directory, or an unreadable image.
DatasetManifest load_classification_dir(const std::filesystem::path& root, Split split);

/// Triples matched by file stem across A/, B/ and label/. Throws ConfigError
/// naming the first stem missing from any subdirectory.
DatasetManifest load_bitemporal_dir(const std::filesystem::path& root, Split split);

std::vector<ClassificationSample> load_classification_samples(const DatasetManifest& m);
/// Masks are binarized at half intensity; image shapes within a pair must match.
std::vector<BitemporalSample> load_bitemporal_samples(const DatasetManifest& m);

// ------------------------------------------------------------------ images

/// RGB in [0,1]; grayscale files are replicated to three channels.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

// ------------------------------------------------------------------ tiling

struct Tile {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// Non-overlapping cover of a width x height image. Each axis is cut into
/// max_side pieces; a trailing remainder shorter than max_side/2 is merged
/// into the preceding piece.
std::vector<Tile> tile_layout(int width, int height, int max_side = 550);
std::vector<Image> tile_for_pretraining(const Image& image, int max_side = 550);

// ------------------------------------------------------------ fingerprints

struct DatasetFingerprint {
  std::size_t items = 0;
  std::uint64_t content_hash = 0;  // FNV-1a over pixels, labels and masks

  std::string hex() const;
};

DatasetFingerprint fingerprint(const std::vector<ClassificationSample>& data);
DatasetFingerprint fingerprint(const std::vector<BitemporalSample>& data);
DatasetFingerprint fingerprint(const std::vector<Image>& images);

/// Writes a bitemporal dataset in the layout load_bitemporal_dir expects.
void write_bitemporal_dir(const std::filesystem::path& root, Split split,
                          const std::vector<BitemporalSample>& data);
/// Writes a classification dataset plus its split file.
void write_classification_dir(const std::filesystem::path& root, Split split,
                              const std::vector<ClassificationSample>& data,
                              const std::vector<std::string>& class_names);

}  // namespace scalebench
