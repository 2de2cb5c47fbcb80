#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"

#include <array>

namespace mvs {

/// The eight neighbour offsets (dx, dy), counterclockwise in image
/// coordinates starting at +x. Cross products pair offset k with k+1 mod 8.
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets = {{
    {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
}};

/// Unit normals from the mean of the eight neighbour cross products, oriented
/// so that n_z < 0. Pixels lacking a valid depth in the 3x3 neighbourhood get
/// the zero vector.
NormalMap normal_from_depth(const DepthMap& depth, const CameraIntrinsics& k);

/// True where normal_from_depth produced a unit normal.
bool normal_valid(const NormalMap& normals, int y, int x);

/// w_k(p) = exp(-alpha1 |I(p + o_k) - I(p)|) for each of the eight offsets,
/// using clamp-to-edge access at the border.
std::array<ImageGrid, 8> edge_weights(const ImageGrid& luma, double alpha1);

/// Each pixel gathers one depth proposal per neighbour from that neighbour's
/// (depth, normal) through the tangent-plane constraint, then takes the
/// edge-weighted mean. Proposals with a grazing denominator or outside
/// `range` are dropped; pixels without proposals keep their input depth.
/// `image` may be at depth resolution or any power-of-two multiple of it.
DepthMap depth_from_normal(const DepthMap& depth, const NormalMap& normals, const CameraIntrinsics& k,
                           const ImageGrid& image, double alpha1, const DepthRange& range);

/// Alternates normal_from_depth and depth_from_normal `iterations` times.
DepthMap refine_depth_nd(const DepthMap& initial, const CameraIntrinsics& k, const ImageGrid& image,
                         double alpha1, int iterations, const DepthRange& range);

}  // namespace mvs
