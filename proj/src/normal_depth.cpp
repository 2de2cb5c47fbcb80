#include "mvs/normal_depth.hpp"

#include "mvs/features.hpp"
#include "mvs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvs {

NormalMap normal_from_depth(const DepthMap& depth, const CameraIntrinsics& k) {
  const int h = depth.height(), w = depth.width();
  NormalMap normals(h, w, 3);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!(depth(y, x) > 0)) continue;
      bool complete = true;
      std::array<Point3, 8> nb;
      for (int i = 0; i < 8; ++i) {
        const int xx = x + kNeighborOffsets[i][0], yy = y + kNeighborOffsets[i][1];
        if (!depth.contains(yy, xx) || !(depth(yy, xx) > 0)) {
          complete = false;
          break;
        }
        nb[i] = backproject<double>(PixelCoord(xx, yy), depth(yy, xx), k);
      }
      if (!complete) continue;
      const Point3 center = backproject<double>(PixelCoord(x, y), depth(y, x), k);
      Point3 sum = Point3::Zero();
      for (int i = 0; i < 8; ++i) sum += (nb[i] - center).cross(nb[(i + 1) % 8] - center);
      Point3 n = sum / 8.0;
      const double len = n.norm();
      if (!(len > 0) || !std::isfinite(len)) continue;
      n /= len;
      if (n.z() > 0) n = -n;
      normals.pixel(y, x) = n;
    }
  });
  return normals;
}

bool normal_valid(const NormalMap& normals, int y, int x) {
  return normals.pixel(y, x).squaredNorm() > 0.5;
}

std::array<ImageGrid, 8> edge_weights(const ImageGrid& luma, double alpha1) {
  if (luma.channels() != 1) throw std::invalid_argument("edge_weights: expected a single-channel image");
  std::array<ImageGrid, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[i] = ImageGrid(luma.height(), luma.width(), 1);
    const int dx = kNeighborOffsets[i][0], dy = kNeighborOffsets[i][1];
    for (int y = 0; y < luma.height(); ++y) {
      for (int x = 0; x < luma.width(); ++x) {
        out[i](y, x) = std::exp(-alpha1 * std::abs(luma.clamped(y + dy, x + dx) - luma(y, x)));
      }
    }
  }
  return out;
}

namespace {

ImageGrid luma_at_resolution(const ImageGrid& image, int height, int width) {
  ImageGrid luma = to_luma(image);
  while (luma.height() > height && luma.height() >= 2 && luma.width() >= 2) luma = downsample_half(luma);
  if (luma.height() != height || luma.width() != width) {
    throw std::invalid_argument("depth_from_normal: image size is not a power-of-two multiple of the depth size");
  }
  return luma;
}

}  // namespace

DepthMap depth_from_normal(const DepthMap& depth, const NormalMap& normals, const CameraIntrinsics& k,
                           const ImageGrid& image, double alpha1, const DepthRange& range) {
  if (!depth.same_extent(normals) || normals.channels() != 3) {
    throw std::invalid_argument("depth_from_normal: normal map does not match depth map");
  }
  const int h = depth.height(), w = depth.width();
  const auto weights = edge_weights(luma_at_resolution(image, h, w), alpha1);
  DepthMap out = depth;
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!(depth(y, x) > 0)) continue;
      const Point3 ray_q = k.ray(PixelCoord(x, y));
      double num = 0, den = 0;
      for (int i = 0; i < 8; ++i) {
        const int xx = x + kNeighborOffsets[i][0], yy = y + kNeighborOffsets[i][1];
        if (!depth.contains(yy, xx) || !(depth(yy, xx) > 0) || !normal_valid(normals, yy, xx)) continue;
        const Point3 n = normals.pixel(yy, xx);
        const double denom = n.dot(ray_q);
        if (std::abs(denom) < 1e-8) continue;
        // n . (Z_i r_i - Z_q r_q) = 0 solved for Z_q.
        const double proposal = depth(yy, xx) * n.dot(k.ray(PixelCoord(xx, yy))) / denom;
        if (!range.contains(proposal)) continue;
        const double wgt = weights[i](y, x);
        num += wgt * proposal;
        den += wgt;
      }
      // A mean of in-range proposals can round one ulp past the bounds.
      if (den > 0) out(y, x) = std::clamp(num / den, range.min, range.max);
    }
  });
  return out;
}

DepthMap refine_depth_nd(const DepthMap& initial, const CameraIntrinsics& k, const ImageGrid& image,
                         double alpha1, int iterations, const DepthRange& range) {
  if (iterations < 1) throw std::invalid_argument("refine_depth_nd: iterations must be >= 1");
  DepthMap depth = initial;
  for (int i = 0; i < iterations; ++i) {
    depth = depth_from_normal(depth, normal_from_depth(depth, k), k, image, alpha1, range);
  }
  return depth;
}

}  // namespace mvs
