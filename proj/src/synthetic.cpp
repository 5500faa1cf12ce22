#include <cmath>

#include "gcrf/training.hpp"

namespace gcrf {

namespace {

struct Shape {
  int cls = 0;
  bool ellipse = true;
  double cy = 0, cx = 0, ry = 0, rx = 0;

  bool contains(int y, int x) const {
    const double dy = (y - cy) / ry, dx = (x - cx) / rx;
    return ellipse ? (dy * dy + dx * dx <= 1.0) : (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0);
  }
};

constexpr double kPalette[8][3] = {
    {0.25, 0.28, 0.24},  // background
    {0.85, 0.20, 0.18}, {0.18, 0.38, 0.85}, {0.90, 0.82, 0.20},
    {0.55, 0.20, 0.70}, {0.90, 0.50, 0.12}, {0.18, 0.78, 0.75}, {0.80, 0.40, 0.60},
};

}  // namespace

std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.labels < 2 || cfg.labels > 8) throw std::invalid_argument("synthetic: labels must be in [2,8]");
  if (cfg.height < 32 || cfg.height > 128 || cfg.width < 32 || cfg.width > 128)
    throw std::invalid_argument("synthetic: dims must be in [32,128]");
  if (cfg.count < 1) throw std::invalid_argument("synthetic: count must be >= 1");

  Rng rng(cfg.seed);
  const int h = cfg.height, w = cfg.width, L = cfg.labels;

  std::vector<SyntheticSample> out;
  out.reserve(cfg.count);
  for (int s = 0; s < cfg.count; ++s) {
    SyntheticSample sample;
    sample.labels = LabelMap(h, w, 0);
    sample.image = Image(h, w, 3);

    // Foreground classes occupy stereotyped vertical bands, so label
    // co-occurrence and position carry information beyond local color.
    std::vector<Shape> shapes;
    for (int c = 1; c < L; ++c) {
      if (rng.uniform() > 0.75) continue;  // class absent from this image
      Shape sh;
      sh.cls = c;
      sh.ellipse = rng.uniform() < 0.6;
      const double band0 = static_cast<double>(c - 1) / (L - 1);
      const double band1 = static_cast<double>(c) / (L - 1);
      sh.cy = rng.uniform(band0 * h + h * 0.08, band1 * h - h * 0.08);
      sh.cx = rng.uniform(w * 0.2, w * 0.8);
      sh.ry = rng.uniform(h * 0.10, h * 0.22);
      sh.rx = rng.uniform(w * 0.10, w * 0.22);
      shapes.push_back(sh);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (const Shape& sh : shapes)
          if (sh.contains(y, x)) sample.labels.at(y, x) = static_cast<uint8_t>(sh.cls);

    // Guide: per-class base color, smooth illumination ramp, pixel noise.
    const double ill_ax = rng.uniform(-0.1, 0.1), ill_ay = rng.uniform(-0.1, 0.1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int c = sample.labels.at(y, x);
        const double ill = 1.0 + ill_ay * (static_cast<double>(y) / h - 0.5) +
                           ill_ax * (static_cast<double>(x) / w - 0.5);
        for (int ch = 0; ch < 3; ++ch) {
          double v = kPalette[c][ch] * ill + rng.normal(0.03);
          sample.image.at(y, x, ch) = std::clamp(v, 0.0, 1.0);
        }
      }

    // Boundary jitter: sample the labels through a smooth displacement
    // field of amplitude <= cfg.jitter before building the unaries.
    LabelMap jittered = sample.labels;
    if (cfg.jitter > 0) {
      const double fy1 = rng.uniform(0.5, 2.0), fx1 = rng.uniform(0.5, 2.0);
      const double fy2 = rng.uniform(0.5, 2.0), fx2 = rng.uniform(0.5, 2.0);
      const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = 2.0 * M_PI * (fy1 * y / h + fx1 * x / w) + p1;
          const double v = 2.0 * M_PI * (fy2 * y / h + fx2 * x / w) + p2;
          const int sy = std::clamp(y + static_cast<int>(std::lround(cfg.jitter * std::sin(u))), 0, h - 1);
          const int sx = std::clamp(x + static_cast<int>(std::lround(cfg.jitter * std::sin(v))), 0, w - 1);
          jittered.at(y, x) = sample.labels.at(sy, sx);
        }
    }

    sample.unary = Image(h, w, L);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int t = jittered.at(y, x);
        for (int v = 0; v < L; ++v)
          sample.unary.at(y, x, v) = (v == t ? 0.0 : cfg.unary_margin) + rng.normal(cfg.noise_sigma);
      }

    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace gcrf
