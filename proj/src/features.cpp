#include "mvs/features.hpp"

#include "mvs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mvs {

void FeatureConfig::validate() const {
  if (channels < 1 || channels > 8) {
    throw std::invalid_argument("FeatureConfig: channels must be in [1, 8], got " + std::to_string(channels));
  }
  if (window < 3 || window % 2 == 0) {
    throw std::invalid_argument("FeatureConfig: window must be odd and >= 3, got " + std::to_string(window));
  }
  if (!(epsilon > 0)) throw std::invalid_argument("FeatureConfig: epsilon must be positive");
}

const FeatureLevel& FeaturePyramid::at_level(int level) const {
  for (const auto& l : levels) {
    if (l.level == level) return l;
  }
  throw std::out_of_range("FeaturePyramid: no level " + std::to_string(level));
}

ImageGrid downsample_half(const ImageGrid& img) {
  if (img.height() < 2 || img.width() < 2) {
    throw std::invalid_argument("downsample_half: image must be at least 2x2");
  }
  const int h = img.height() / 2, w = img.width() / 2, c = img.channels();
  ImageGrid out(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        out(y, x, k) = 0.25 * (img(2 * y, 2 * x, k) + img(2 * y, 2 * x + 1, k) +
                               img(2 * y + 1, 2 * x, k) + img(2 * y + 1, 2 * x + 1, k));
      }
    }
  }
  return out;
}

DepthMap downsample_depth(const DepthMap& depth, int levels) {
  if (levels == 0) return depth;
  const int f = 1 << levels;
  const int h = depth.height() / f, w = depth.width() / f;
  if (h < 1 || w < 1) throw std::invalid_argument("downsample_depth: depth map too small for level");
  DepthMap out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      int n = 0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          const double z = depth(y * f + dy, x * f + dx);
          if (z > 0) {
            sum += z;
            ++n;
          }
        }
      }
      out(y, x) = n > 0 ? sum / n : 0.0;
    }
  }
  return out;
}

namespace {

// Truncated box sum of one channel, separable; also returns the per-pixel
// sample count through `count`.
ImageGrid box_sum(const ImageGrid& img, int radius, ImageGrid* count) {
  const int h = img.height(), w = img.width();
  ImageGrid rows(h, w, 1), out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        if (xx >= 0 && xx < w) s += img(y, xx);
      }
      rows(y, x) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy >= 0 && yy < h) s += rows(yy, x);
      }
      out(y, x) = s;
    }
  }
  if (count) {
    *count = ImageGrid(h, w, 1);
    for (int y = 0; y < h; ++y) {
      const int ny = std::min(h - 1, y + radius) - std::max(0, y - radius) + 1;
      for (int x = 0; x < w; ++x) {
        const int nx = std::min(w - 1, x + radius) - std::max(0, x - radius) + 1;
        (*count)(y, x) = static_cast<double>(nx * ny);
      }
    }
  }
  return out;
}

double axis_gradient(const ImageGrid& g, int y, int x, int dy, int dx) {
  const int y0 = y - dy, x0 = x - dx, y1 = y + dy, x1 = x + dx;
  const bool has0 = g.contains(y0, x0), has1 = g.contains(y1, x1);
  if (has0 && has1) return 0.5 * (g(y1, x1) - g(y0, x0));
  if (has1) return g(y1, x1) - g(y, x);
  if (has0) return g(y, x) - g(y0, x0);
  return 0.0;
}

}  // namespace

ImageGrid raw_feature_channels(const ImageGrid& luma, int channels) {
  if (luma.channels() != 1) throw std::invalid_argument("raw_feature_channels: expected one channel");
  const int h = luma.height(), w = luma.width();
  ImageGrid out(h, w, channels);

  ImageGrid count;
  const ImageGrid mean = box_sum(luma, 1, &count);
  static const int kDir[4][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}};  // (dy, dx)

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = axis_gradient(luma, y, x, 0, 1);
      const double gy = axis_gradient(luma, y, x, 1, 0);
      double f[8];
      f[0] = mean(y, x) / count(y, x);
      f[1] = gx;
      f[2] = gy;
      f[3] = std::sqrt(gx * gx + gy * gy);
      for (int k = 0; k < 4; ++k) {
        const int dy = kDir[k][0], dx = kDir[k][1];
        f[4 + k] = luma.clamped(y + dy, x + dx) + luma.clamped(y - dy, x - dx) - 2.0 * luma(y, x);
      }
      for (int c = 0; c < channels; ++c) out(y, x, c) = f[c];
    }
  }
  return out;
}

ImageGrid contrast_normalize(const ImageGrid& img, int window, double epsilon) {
  const int h = img.height(), w = img.width(), c = img.channels();
  const int radius = window / 2;
  ImageGrid out(h, w, c);
  for (int k = 0; k < c; ++k) {
    const ImageGrid f = img.channel(k);
    ImageGrid sq(h, w, 1);
    sq.array() = f.array().square();
    ImageGrid count;
    const ImageGrid sum = box_sum(f, radius, &count);
    const ImageGrid sum_sq = box_sum(sq, radius, nullptr);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double n = count(y, x);
        const double mu = sum(y, x) / n;
        const double var = std::max(0.0, sum_sq(y, x) / n - mu * mu);
        out(y, x, k) = (f(y, x) - mu) / (std::sqrt(var) + epsilon);
      }
    }
  }
  return out;
}

ImageGrid feature_map(const ImageGrid& luma, const FeatureConfig& cfg) {
  cfg.validate();
  return contrast_normalize(raw_feature_channels(luma, cfg.channels), cfg.window, cfg.epsilon);
}

FeaturePyramid extract_pyramid(const ImageGrid& img, const FeatureConfig& cfg) {
  cfg.validate();
  if (img.height() < 8 || img.width() < 8) {
    throw std::invalid_argument("extract_pyramid: image must be at least 8x8, got " +
                                std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  FeaturePyramid pyr;
  pyr.config = cfg;
  ImageGrid luma = to_luma(img);
  std::vector<ImageGrid> lumas;
  for (int level = 1; level <= 3; ++level) {
    luma = downsample_half(luma);
    lumas.push_back(luma);
  }
  pyr.levels.resize(3);
  parallel_for(3, [&](int i) {
    pyr.levels[i].level = i + 1;
    pyr.levels[i].features = feature_map(lumas[i], cfg);
  });
  return pyr;
}

}  // namespace mvs
