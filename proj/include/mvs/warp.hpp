#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mvs {

/// Bilinear sample of all channels at a continuous position.
struct Sample {
  Eigen::VectorXd value;  // zero when !valid
  Eigen::VectorXd d_dx;   // partial derivatives inside the sampled cell
  Eigen::VectorXd d_dy;
  bool valid = false;
  /// Index y0 * width + x0 of the interpolation cell, -1 when invalid.
  std::int64_t cell = -1;
};

/// Four-neighbour bilinear interpolation over the domain [0, W-1] x [0, H-1].
/// Positions outside the domain (shrunk by `border` pixels on every side)
/// return a zero vector with valid = false. Derivatives are one-sided on
/// cell boundaries: the cell containing the position is floor(p), except on
/// the last row/column where the preceding cell is used.
Sample bilinear_sample(const ImageGrid& img, const PixelCoord& p, int border = 0);

/// Source image resampled into the reference view through a per-pixel depth.
struct WarpResult {
  ImageGrid image;          // I'_src, zero where mask == 0
  BinaryMask mask;          // 1 iff depth valid, transfer valid and sample in bounds
  ImageGrid d_ddepth;       // d(image)/d(depth) per channel, zero where mask == 0
  std::vector<std::int64_t> cells;  // interpolation cell per pixel, -1 where mask == 0
};

struct WarpOptions {
  /// Samples closer than this to the source border are masked out.
  int border = 0;
  bool with_derivative = false;
};

/// Warps `src` onto the reference pixel grid of `depth`. T maps reference
/// camera coordinates to source camera coordinates.
WarpResult warp_image(const ImageGrid& src, const DepthMap& depth, const CameraIntrinsics& k_ref,
                      const CameraIntrinsics& k_src, const RigidTransform& t,
                      const WarpOptions& options = {});

/// Constant-depth variant used by the plane sweep.
WarpResult warp_image_at_depth(const ImageGrid& src, double depth, int height, int width,
                               const CameraIntrinsics& k_ref, const CameraIntrinsics& k_src,
                               const RigidTransform& t);

}  // namespace mvs
