#include "scalebench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace scalebench {

namespace {

using Rng = std::mt19937_64;

float uniform(Rng& rng, float lo, float hi) {
  return std::uniform_real_distribution<float>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool covers(const Shape& s, int px, int py) {
  if (px < s.x || py < s.y || px >= s.x + s.w || py >= s.y + s.h) return false;
  if (s.kind == Shape::Kind::rectangle) return true;
  const double cx = s.x + s.w / 2.0, cy = s.y + s.h / 2.0;
  const double dx = (px + 0.5 - cx) / (s.w / 2.0);
  const double dy = (py + 0.5 - cy) / (s.h / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

bool boxes_clear(const Shape& a, const Shape& b, int gap) {
  return a.x + a.w + gap <= b.x || b.x + b.w + gap <= a.x || a.y + a.h + gap <= b.y ||
         b.y + b.h + gap <= a.y;
}

// Smooth textured ground: a few low-frequency sinusoids over a base colour.
Image make_background(int side, float texture, Rng& rng) {
  Image img(side, side, 3);
  std::array<float, 3> base{uniform(rng, 0.18f, 0.35f), uniform(rng, 0.25f, 0.45f),
                            uniform(rng, 0.15f, 0.3f)};
  struct Wave {
    float fx, fy, phase, amp;
  };
  std::array<Wave, 3> waves;
  for (auto& w : waves) {
    w = {uniform(rng, 0.02f, 0.12f), uniform(rng, 0.02f, 0.12f),
         uniform(rng, 0.0f, 2.0f * std::numbers::pi_v<float>), uniform(rng, 0.02f, 0.06f)};
  }
  std::uniform_real_distribution<float> grain(-texture, texture);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      float t = 0.0f;
      for (const auto& w : waves) t += w.amp * std::sin(w.fx * x * 6.2832f + w.fy * y * 6.2832f + w.phase);
      t += texture > 0.0f ? grain(rng) : 0.0f;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = base[c] + t;
    }
  }
  return img;
}

Shape random_shape(int side, const SyntheticCdParams& p, Rng& rng) {
  Shape s;
  s.kind = uniform_int(rng, 0, 2) == 0 ? Shape::Kind::ellipse : Shape::Kind::rectangle;
  s.w = uniform_int(rng, p.size_min, p.size_max);
  s.h = uniform_int(rng, p.size_min, p.size_max);
  s.x = uniform_int(rng, 0, side - s.w);
  s.y = uniform_int(rng, 0, side - s.h);
  const float roof = uniform(rng, 0.6f, 0.95f);
  s.color = {roof * uniform(rng, 0.8f, 1.0f), roof * uniform(rng, 0.8f, 1.0f),
             roof * uniform(rng, 0.8f, 1.0f)};
  return s;
}

// Rejection-samples a shape clear of every shape in `taken`.
bool place_shape(int side, const SyntheticCdParams& p, const std::vector<Shape>& taken,
                 Rng& rng, Shape& out) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    Shape s = random_shape(side, p, rng);
    bool ok = true;
    for (const auto& t : taken) {
      if (!boxes_clear(s, t, 2)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out = s;
      return true;
    }
  }
  return false;
}

Image render(const Image& background, std::span<const Shape> shapes, float noise, Rng& rng) {
  Image img = background;
  for (const auto& s : shapes) {
    for (int y = s.y; y < s.y + s.h; ++y) {
      for (int x = s.x; x < s.x + s.w; ++x) {
        if (!covers(s, x, y)) continue;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = s.color[c];
      }
    }
  }
  std::normal_distribution<float> gauss(0.0f, noise);
  for (auto& v : img.pixels) v += noise > 0.0f ? gauss(rng) : 0.0f;
  return img;
}

void clamp01(Image& img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

BinaryMask rasterize_shapes(std::span<const Shape> shapes, int side) {
  BinaryMask mask(side, side);
  for (const auto& s : shapes) {
    for (int y = std::max(0, s.y); y < std::min(side, s.y + s.h); ++y) {
      for (int x = std::max(0, s.x); x < std::min(side, s.x + s.w); ++x) {
        if (covers(s, x, y)) mask.at(y, x) = 1;
      }
    }
  }
  return mask;
}

std::vector<SyntheticPair> make_synthetic_cd_pairs(int n_pairs, const SyntheticCdParams& p,
                                                   std::uint64_t seed) {
  if (p.side < 32) throw std::invalid_argument("synthetic fixture: side must be >= 32");
  if (p.size_min < 2 || p.size_max < p.size_min || p.size_max > p.side) {
    throw std::invalid_argument("synthetic fixture: invalid shape size range");
  }
  if (p.shapes_min < 0 || p.shapes_max < p.shapes_min || p.edits_min < 0 ||
      p.edits_max < p.edits_min) {
    throw std::invalid_argument("synthetic fixture: invalid count range");
  }
  Rng rng(seed);
  std::vector<SyntheticPair> pairs;
  pairs.reserve(static_cast<std::size_t>(std::max(0, n_pairs)));
  for (int i = 0; i < n_pairs; ++i) {
    SyntheticPair pair;
    const Image background = make_background(p.side, p.texture, rng);

    const int n_shapes = uniform_int(rng, p.shapes_min, p.shapes_max);
    for (int s = 0; s < n_shapes; ++s) {
      Shape shape;
      if (place_shape(p.side, p, pair.shapes_first, rng, shape)) pair.shapes_first.push_back(shape);
    }

    pair.shapes_second = pair.shapes_first;
    std::vector<Shape> occupied = pair.shapes_first;
    const int n_edits = uniform_int(rng, p.edits_min, p.edits_max);
    for (int e = 0; e < n_edits; ++e) {
      const bool remove = !pair.shapes_second.empty() && uniform_int(rng, 0, 1) == 0;
      if (remove) {
        const int victim = uniform_int(rng, 0, static_cast<int>(pair.shapes_second.size()) - 1);
        pair.shapes_second.erase(pair.shapes_second.begin() + victim);
      } else {
        Shape shape;
        if (place_shape(p.side, p, occupied, rng, shape)) {
          pair.shapes_second.push_back(shape);
          occupied.push_back(shape);
        }
      }
    }

    pair.sample.first = render(background, pair.shapes_first, p.noise, rng);
    pair.sample.second = render(background, pair.shapes_second, p.noise, rng);
    const float gain = 1.0f + uniform(rng, -p.photometric_jitter, p.photometric_jitter);
    const float bias = uniform(rng, -p.photometric_jitter, p.photometric_jitter);
    for (auto& v : pair.sample.second.pixels) v = v * gain + bias;
    clamp01(pair.sample.first);
    clamp01(pair.sample.second);

    const auto a = rasterize_shapes(pair.shapes_first, p.side);
    const auto b = rasterize_shapes(pair.shapes_second, p.side);
    pair.sample.change_mask = BinaryMask(p.side, p.side);
    for (std::size_t k = 0; k < a.bits.size(); ++k) {
      pair.sample.change_mask.bits[k] = a.bits[k] ^ b.bits[k];
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<BitemporalSample> make_synthetic_cd_fixture(int n_pairs, int side, std::uint64_t seed) {
  SyntheticCdParams params;
  params.side = side;
  params.size_min = std::max(3, side * 6 / 64);
  params.size_max = std::max(params.size_min, side * 16 / 64);
  std::vector<BitemporalSample> out;
  for (auto& p : make_synthetic_cd_pairs(n_pairs, params, seed)) out.push_back(std::move(p.sample));
  return out;
}

std::vector<std::string> synthetic_class_names(int num_classes) {
  static const std::vector<std::string> kNames{"stripes_horizontal", "stripes_vertical",
                                               "stripes_diagonal",   "checkerboard",
                                               "dots",               "smooth"};
  if (num_classes < 2 || num_classes > static_cast<int>(kNames.size())) {
    throw std::invalid_argument("synthetic classification: 2..6 classes supported");
  }
  return {kNames.begin(), kNames.begin() + num_classes};
}

std::vector<ClassificationSample> make_synthetic_classification_fixture(
    int per_class, const SyntheticClsParams& p, std::uint64_t seed) {
  (void)synthetic_class_names(p.num_classes);
  if (p.side < 32) throw std::invalid_argument("synthetic classification: side must be >= 32");
  Rng rng(seed);
  std::vector<ClassificationSample> out;
  for (int i = 0; i < per_class; ++i) {
    for (int label = 0; label < p.num_classes; ++label) {
      const int period = uniform_int(rng, 3, 5);
      const int phase = uniform_int(rng, 0, period - 1);
      std::array<float, 3> lo{}, hi{};
      for (int c = 0; c < 3; ++c) {
        lo[c] = uniform(rng, 0.1f, 0.4f);
        hi[c] = uniform(rng, 0.6f, 0.9f);
      }
      const float fx = uniform(rng, 0.03f, 0.08f), fy = uniform(rng, 0.03f, 0.08f);
      const float ph = uniform(rng, 0.0f, 6.2832f);
      Image img(p.side, p.side, 3);
      std::normal_distribution<float> gauss(0.0f, p.noise);
      for (int y = 0; y < p.side; ++y) {
        for (int x = 0; x < p.side; ++x) {
          float t = 0.0f;
          switch (label) {
            case 0: t = ((y + phase) / period) % 2; break;
            case 1: t = ((x + phase) / period) % 2; break;
            case 2: t = ((x + y + phase) / period) % 2; break;
            case 3: t = (((x + phase) / period) + ((y + phase) / period)) % 2; break;
            case 4: t = ((x + phase) % (2 * period) < 2 && (y + phase) % (2 * period) < 2) ? 1.0f : 0.0f; break;
            default: t = 0.5f + 0.5f * std::sin(fx * x * 6.2832f + ph) * std::sin(fy * y * 6.2832f); break;
          }
          for (int c = 0; c < 3; ++c) {
            img.at(y, x, c) = std::clamp(lo[c] + (hi[c] - lo[c]) * t + gauss(rng), 0.0f, 1.0f);
          }
        }
      }
      out.push_back({std::move(img), label});
    }
  }
  return out;
}

}  // namespace scalebench
