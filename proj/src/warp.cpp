#include "mvs/warp.hpp"

#include "mvs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvs {
namespace {

// Lower interpolation index and fractional weight along one axis of length n.
inline void cell_1d(double v, int n, int& i0, int& i1, double& w) {
  i0 = static_cast<int>(std::floor(v));
  if (i0 >= n - 1) i0 = n >= 2 ? n - 2 : 0;
  i1 = n >= 2 ? i0 + 1 : i0;
  w = v - i0;
}

}  // namespace

Sample bilinear_sample(const ImageGrid& img, const PixelCoord& p, int border) {
  const int c = img.channels();
  Sample s;
  s.value = Eigen::VectorXd::Zero(c);
  s.d_dx = Eigen::VectorXd::Zero(c);
  s.d_dy = Eigen::VectorXd::Zero(c);

  // Positions within round-off of the domain edge are snapped onto it so that
  // exact-identity transfers keep the last row and column.
  constexpr double kSnap = 1e-9;
  const double lo_x = border, hi_x = img.width() - 1 - border;
  const double lo_y = border, hi_y = img.height() - 1 - border;
  if (!(p.x() >= lo_x - kSnap && p.x() <= hi_x + kSnap && p.y() >= lo_y - kSnap &&
        p.y() <= hi_y + kSnap) ||
      hi_x < lo_x || hi_y < lo_y) {
    return s;
  }
  const double px = std::clamp(p.x(), lo_x, hi_x);
  const double py = std::clamp(p.y(), lo_y, hi_y);

  int x0, x1, y0, y1;
  double wx, wy;
  cell_1d(px, img.width(), x0, x1, wx);
  cell_1d(py, img.height(), y0, y1, wy);

  const auto v00 = img.pixel(y0, x0);
  const auto v01 = img.pixel(y0, x1);
  const auto v10 = img.pixel(y1, x0);
  const auto v11 = img.pixel(y1, x1);
  s.value = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
  s.d_dx = (1 - wy) * (v01 - v00) + wy * (v11 - v10);
  s.d_dy = (1 - wx) * (v10 - v00) + wx * (v11 - v01);
  s.valid = true;
  s.cell = static_cast<std::int64_t>(y0) * img.width() + x0;
  return s;
}

WarpResult warp_image(const ImageGrid& src, const DepthMap& depth, const CameraIntrinsics& k_ref,
                      const CameraIntrinsics& k_src, const RigidTransform& t,
                      const WarpOptions& options) {
  if (depth.channels() != 1) throw std::invalid_argument("warp_image: depth must have one channel");
  if (depth.width() != k_ref.width || depth.height() != k_ref.height) {
    throw std::invalid_argument("warp_image: depth size does not match reference intrinsics");
  }
  if (src.width() != k_src.width || src.height() != k_src.height) {
    throw std::invalid_argument("warp_image: source size does not match source intrinsics");
  }
  const int h = depth.height(), w = depth.width(), c = src.channels();
  WarpResult out;
  out.image = ImageGrid(h, w, c);
  out.mask = BinaryMask(h, w, 1);
  if (options.with_derivative) out.d_ddepth = ImageGrid(h, w, c);
  out.cells.assign(static_cast<std::size_t>(h) * w, -1);

  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double z = depth(y, x);
      if (!(z > 0)) continue;
      const auto tr = transfer_pixel<double>(PixelCoord(x, y), z, k_ref, k_src, t);
      if (!tr.valid) continue;
      const Sample s = bilinear_sample(src, tr.pixel, options.border);
      if (!s.valid) continue;
      out.image.pixel(y, x) = s.value;
      out.mask(y, x) = 1.0;
      out.cells[static_cast<std::size_t>(y) * w + x] = s.cell;
      if (options.with_derivative) {
        out.d_ddepth.pixel(y, x) = s.d_dx * tr.dpixel_ddepth.x() + s.d_dy * tr.dpixel_ddepth.y();
      }
    }
  });
  return out;
}

WarpResult warp_image_at_depth(const ImageGrid& src, double depth, int height, int width,
                               const CameraIntrinsics& k_ref, const CameraIntrinsics& k_src,
                               const RigidTransform& t) {
  return warp_image(src, DepthMap(height, width, 1, depth), k_ref, k_src, t);
}

}  // namespace mvs
