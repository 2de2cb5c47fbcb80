#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"
#include "mvs/scene.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace testutil {

inline mvs::ImageGrid random_image(mvs::Lcg& rng, int h, int w, int c = 1) {
  mvs::ImageGrid img(h, w, c);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.array()[i] = rng.uniform();
  return img;
}

inline double max_abs_diff(const mvs::ImageGrid& a, const mvs::ImageGrid& b) {
  return (a.array() - b.array()).abs().maxCoeff();
}

/// Depth of the camera-frame plane n . P = c seen through pixel (x, y).
inline double plane_depth(const mvs::Point3& n, double c, const mvs::CameraIntrinsics& k, double x, double y) {
  return c / n.dot(k.ray(mvs::PixelCoord(x, y)));
}

inline mvs::DepthMap plane_depth_map(const mvs::Point3& n, double c, const mvs::CameraIntrinsics& k) {
  mvs::DepthMap d(k.height, k.width, 1);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) d(y, x) = plane_depth(n, c, k, x, y);
  }
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mvs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
