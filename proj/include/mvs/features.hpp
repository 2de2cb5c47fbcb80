#pragma once

#include "mvs/image.hpp"

#include <vector>

namespace mvs {

struct FeatureConfig {
  /// Number of descriptor channels kept, 1..8, taken in the order listed in
  /// feature_map().
  int channels = 8;
  /// Side of the square contrast-normalization window; odd and >= 3.
  int window = 7;
  /// Added to the local standard deviation before dividing.
  double epsilon = 1e-3;

  void validate() const;
};

struct FeatureLevel {
  int level = 0;  // scale = 2^-level
  ImageGrid features;

  double scale() const { return 1.0 / static_cast<double>(1 << level); }
};

/// Descriptor maps at scales 1/2, 1/4 and 1/8 (levels 1, 2, 3).
struct FeaturePyramid {
  std::vector<FeatureLevel> levels;
  FeatureConfig config;

  /// Width of the band along the border where descriptors see truncated
  /// neighbourhoods.
  int border() const { return config.window / 2 + 1; }
  const FeatureLevel& at_level(int level) const;
};

/// 2x2 non-overlapping mean; output size floor(h/2) x floor(w/2).
ImageGrid downsample_half(const ImageGrid& img);

/// Mean of each 2^levels x 2^levels block over pixels with nonzero value;
/// blocks without a valid pixel become 0. Used to bring depth maps to a
/// pyramid level.
DepthMap downsample_depth(const DepthMap& depth, int levels);

/// Hand-crafted descriptor on a single-channel image, each channel locally
/// contrast-normalized:
///   0 local 3x3 mean, 1 horizontal gradient, 2 vertical gradient,
///   3 gradient magnitude, 4..7 second differences along 0, 45, 90, 135 deg.
ImageGrid feature_map(const ImageGrid& luma, const FeatureConfig& cfg);

/// Raw (unnormalized) channels of feature_map().
ImageGrid raw_feature_channels(const ImageGrid& luma, int channels);

/// (f - local mean) / (local std + epsilon) over a window x window box,
/// truncated at the image border.
ImageGrid contrast_normalize(const ImageGrid& img, int window, double epsilon);

/// Converts to luma and builds levels 1..3. Throws std::invalid_argument for
/// inputs smaller than 8x8 or with a channel count other than 1 or 3.
FeaturePyramid extract_pyramid(const ImageGrid& img, const FeatureConfig& cfg = {});

}  // namespace mvs
