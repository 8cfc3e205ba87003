#include "scalebench/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "scalebench/errors.hpp"
#include "scalebench/resample.hpp"

namespace fs = std::filesystem;

namespace scalebench {

std::string_view to_string(DatasetKind k) {
  return k == DatasetKind::classification ? "classification" : "bitemporal";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json items_json = nlohmann::json::array();
  for (const auto& item : items) {
    nlohmann::json j;
    std::vector<std::string> images_str;
    for (const auto& p : item.images) images_str.push_back(p.string());
    j["images"] = images_str;
    if (item.label) j["label"] = *item.label;
    if (!item.mask.empty()) j["mask"] = item.mask.string();
    items_json.push_back(std::move(j));
  }
  return {{"kind", to_string(kind)},
          {"root", root.string()},
          {"split", to_string(split)},
          {"class_names", class_names},
          {"resolution_note", resolution_note},
          {"items", std::move(items_json)}};
}

// ------------------------------------------------------------------ images

Image read_image(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw ConfigError("unreadable image " + path.string());
  cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  cv::Mat f;
  m.convertTo(f, CV_32FC3, 1.0 / 255.0);
  Image out(f.rows, f.cols, 3);
  for (int y = 0; y < f.rows; ++y) {
    std::memcpy(&out.pixels[out.index(y, 0, 0)], f.ptr<float>(y),
                sizeof(float) * static_cast<std::size_t>(f.cols) * 3);
  }
  return out;
}

void write_image(const fs::path& path, const Image& image) {
  if (image.channels != 3) throw std::invalid_argument("write_image: expected 3 channels");
  cv::Mat m(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
        row[x * 3 + (2 - c)] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
      }
    }
  }
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

BinaryMask read_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw ConfigError("unreadable mask " + path.string());
  BinaryMask out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) out.at(y, x) = row[x] >= 128 ? 1 : 0;
  }
  return out;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write " + path.string());
}

// ----------------------------------------------------------------- loaders

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("missing directory " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

}  // namespace

DatasetManifest load_classification_dir(const fs::path& root, Split split) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root not found: " + root.string());
  DatasetManifest m;
  m.kind = DatasetKind::classification;
  m.root = root;
  m.split = split;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) m.class_names.push_back(entry.path().filename().string());
  }
  std::sort(m.class_names.begin(), m.class_names.end());
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < m.class_names.size(); ++i) ids[m.class_names[i]] = static_cast<int>(i);

  const fs::path list = root / (std::string(to_string(split)) + ".txt");
  std::ifstream in(list);
  if (!in) throw ConfigError("missing split file " + list.string());
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto slash = line.find('/');
    if (slash == std::string::npos) throw ConfigError("split entry without class: " + line);
    const std::string cls = line.substr(0, slash);
    auto it = ids.find(cls);
    if (it == ids.end()) throw ConfigError("unknown class '" + cls + "' in " + list.string());
    const fs::path file = root / line;
    if (!fs::is_regular_file(file)) throw ConfigError("unreadable image " + file.string());
    m.items.push_back({{file}, it->second, {}});
  }
  if (m.items.empty()) throw ConfigError("empty split " + list.string());
  return m;
}

DatasetManifest load_bitemporal_dir(const fs::path& root, Split split) {
  const fs::path base = root / std::string(to_string(split));
  const auto a = files_by_stem(base / "A");
  const auto b = files_by_stem(base / "B");
  const auto label = files_by_stem(base / "label");

  std::set<std::string> stems;
  for (const auto* dir : {&a, &b, &label}) {
    for (const auto& [stem, _] : *dir) stems.insert(stem);
  }
  DatasetManifest m;
  m.kind = DatasetKind::bitemporal;
  m.root = root;
  m.split = split;
  for (const auto& stem : stems) {
    auto ia = a.find(stem);
    auto ib = b.find(stem);
    auto il = label.find(stem);
    if (ia == a.end()) throw ConfigError("stem '" + stem + "' has no A image");
    if (ib == b.end()) throw ConfigError("stem '" + stem + "' has no B image");
    if (il == label.end()) throw ConfigError("stem '" + stem + "' has no label");
    m.items.push_back({{ia->second, ib->second}, std::nullopt, il->second});
  }
  if (m.items.empty()) throw ConfigError("empty split " + base.string());
  return m;
}

std::vector<ClassificationSample> load_classification_samples(const DatasetManifest& m) {
  if (m.kind != DatasetKind::classification) throw ConfigError("not a classification manifest");
  std::vector<ClassificationSample> out;
  out.reserve(m.items.size());
  for (const auto& item : m.items) out.push_back({read_image(item.images.at(0)), item.label.value()});
  return out;
}

std::vector<BitemporalSample> load_bitemporal_samples(const DatasetManifest& m) {
  if (m.kind != DatasetKind::bitemporal) throw ConfigError("not a bitemporal manifest");
  std::vector<BitemporalSample> out;
  out.reserve(m.items.size());
  for (const auto& item : m.items) {
    BitemporalSample s{read_image(item.images.at(0)), read_image(item.images.at(1)), read_mask(item.mask)};
    try {
      validate(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(item.mask.stem().string() + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------------------ tiling

namespace {

std::vector<std::pair<int, int>> cut_axis(int length, int max_side) {
  std::vector<std::pair<int, int>> spans;  // (offset, size)
  if (length <= max_side) return {{0, length}};
  int offset = 0;
  while (offset < length) {
    const int size = std::min(max_side, length - offset);
    if (!spans.empty() && 2 * size < max_side) {
      spans.back().second += size;
    } else {
      spans.emplace_back(offset, size);
    }
    offset += size;
  }
  return spans;
}

}  // namespace

std::vector<Tile> tile_layout(int width, int height, int max_side) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("tile_layout: empty image");
  if (max_side <= 0) throw std::invalid_argument("tile_layout: max_side must be positive");
  std::vector<Tile> tiles;
  for (const auto& [y, h] : cut_axis(height, max_side)) {
    for (const auto& [x, w] : cut_axis(width, max_side)) tiles.push_back({x, y, w, h});
  }
  return tiles;
}

std::vector<Image> tile_for_pretraining(const Image& image, int max_side) {
  std::vector<Image> out;
  for (const auto& t : tile_layout(image.width, image.height, max_side)) {
    out.push_back(crop(image, t.x, t.y, t.w, t.h));
  }
  return out;
}

// ------------------------------------------------------------ fingerprints

namespace {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  void image(const Image& im) {
    const int dims[3] = {im.height, im.width, im.channels};
    bytes(dims, sizeof dims);
    bytes(im.pixels.data(), im.pixels.size() * sizeof(float));
  }
};

}  // namespace

std::string DatasetFingerprint::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(content_hash));
  return buf;
}

DatasetFingerprint fingerprint(const std::vector<ClassificationSample>& data) {
  Fnv1a f;
  for (const auto& s : data) {
    f.image(s.image);
    f.bytes(&s.label, sizeof s.label);
  }
  return {data.size(), f.h};
}

DatasetFingerprint fingerprint(const std::vector<BitemporalSample>& data) {
  Fnv1a f;
  for (const auto& s : data) {
    f.image(s.first);
    f.image(s.second);
    f.bytes(s.change_mask.bits.data(), s.change_mask.bits.size());
  }
  return {data.size(), f.h};
}

DatasetFingerprint fingerprint(const std::vector<Image>& images) {
  Fnv1a f;
  for (const auto& im : images) f.image(im);
  return {images.size(), f.h};
}

// ----------------------------------------------------------------- writers

void write_bitemporal_dir(const fs::path& root, Split split, const std::vector<BitemporalSample>& data) {
  const fs::path base = root / std::string(to_string(split));
  for (const char* sub : {"A", "B", "label"}) fs::create_directories(base / sub);
  for (std::size_t i = 0; i < data.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%05zu.png", i);
    write_image(base / "A" / stem, data[i].first);
    write_image(base / "B" / stem, data[i].second);
    write_mask(base / "label" / stem, data[i].change_mask);
  }
}

void write_classification_dir(const fs::path& root, Split split,
                              const std::vector<ClassificationSample>& data,
                              const std::vector<std::string>& class_names) {
  // Directory names carry the id so that sorted order reproduces it on load.
  std::vector<std::string> dirs;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    char prefix[8];
    std::snprintf(prefix, sizeof prefix, "%02zu_", i);
    dirs.push_back(prefix + class_names[i]);
    fs::create_directories(root / dirs.back());
  }
  std::ofstream list(root / (std::string(to_string(split)) + ".txt"));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& name = dirs.at(static_cast<std::size_t>(data[i].label));
    char file[48];
    std::snprintf(file, sizeof file, "%s_%05zu.png", std::string(to_string(split)).c_str(), i);
    write_image(root / name / file, data[i].image);
    list << name << '/' << file << '\n';
  }
}

}  // namespace scalebench
