#pragma once

#include "mvs/camera.hpp"
#include "mvs/features.hpp"
#include "mvs/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mvs {

/// Weights of the unsupervised objective. Defaults are the published
/// training values.
struct LossWeights {
  double gamma1 = 1.0;   // pixel-wise
  double gamma2 = 1.0;   // feature-wise
  double lambda1 = 0.8;  // photometric
  double lambda2 = 0.2;  // SSIM
  double lambda3 = 0.067;  // smoothness
  double beta1 = 0.2;    // scale 1/2
  double beta2 = 0.8;    // scale 1/4
  double beta3 = 0.4;    // scale 1/8
  double alpha2 = 0.5;   // first-order edge awareness
  double alpha3 = 0.5;   // second-order edge awareness

  std::array<double, 3> beta() const { return {beta1, beta2, beta3}; }
  void validate() const;
};

/// SSIM stabilizers for intensities in [0, 1].
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// A masked mean and, on request, its gradient with respect to one input.
struct MaskedLoss {
  double value = 0;
  std::int64_t count = 0;  // m, or n for the smoothness term
  ImageGrid gradient;      // empty unless requested
};

/// (1/m) sum over mask-1 pixels of |I_ref - I'| + |dI_ref - dI'| with forward
/// differences along x and y, summed over channels. A difference contributes
/// only when both of its pixels are in the mask. Gradient is w.r.t. `warped`.
MaskedLoss photometric_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                            bool with_gradient = false);

/// Per-pixel SSIM over 3x3 windows restricted to mask-1 pixels;
/// (1/m) sum of (1 - S) / 2, averaged over channels. Gradient is w.r.t.
/// `warped`.
MaskedLoss ssim_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                     bool with_gradient = false);

/// Per-pixel SSIM map (channel-averaged) under the same windowing, for
/// inspection and tests.
ImageGrid ssim_map(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask);

/// Edge-aware first- and second-order smoothness of depth / (d_max - d_min),
/// averaged over all n pixels. `luma` must be at depth resolution. Gradient is
/// w.r.t. `depth`.
MaskedLoss smoothness_loss(const DepthMap& depth, const ImageGrid& luma, double alpha2, double alpha3,
                           const DepthRange& range, bool with_gradient = false);

struct PixelLoss {
  double photo = 0, ssim = 0, smooth = 0, value = 0;
  std::int64_t m = 0;
};

/// lambda1 * photo + lambda2 * ssim + lambda3 * smooth.
PixelLoss pixel_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                     const DepthMap& depth, const LossWeights& weights, const DepthRange& range);

/// Feature-wise term at pyramid `level` (1, 2 or 3). Feature maps belong to
/// that level; `depth` and the cameras are at full resolution and are brought
/// to the level by area averaging and intrinsics scaling. Pixels within
/// `border` of either feature map's edge are excluded. Gradient is w.r.t. the
/// full-resolution depth.
MaskedLoss feature_loss_scale(const ImageGrid& ref_feat, const ImageGrid& src_feat, const DepthMap& depth,
                              const CameraModel& ref_cam, const CameraModel& src_cam, int level,
                              int border = 0, bool with_gradient = false);

struct FeatureLoss {
  std::array<double, 3> per_scale{};
  std::array<std::int64_t, 3> m{};
  double value = 0;
};

/// beta1 L(1/2) + beta2 L(1/4) + beta3 L(1/8).
FeatureLoss feature_loss(const FeaturePyramid& ref, const FeaturePyramid& src, const DepthMap& depth,
                         const CameraModel& ref_cam, const CameraModel& src_cam, const LossWeights& weights);

/// One image with its descriptors and camera.
struct View {
  ImageGrid image;
  FeaturePyramid pyramid;
  CameraModel camera;
};

View make_view(ImageGrid image, const CameraModel& camera, const FeatureConfig& cfg = {});

struct ViewLoss {
  double photo = 0, ssim = 0, smooth = 0, pixel = 0;
  std::array<double, 3> feature_per_scale{};
  double feature = 0;
  double total = 0;
  std::int64_t m = 0;
  std::array<std::int64_t, 3> feature_m{};
};

/// Components summed over source views, so pixel = l1 photo + l2 ssim +
/// l3 smooth and total = g1 pixel + g2 feature hold for the aggregate as
/// well as per view.
struct LossBreakdown {
  double photo = 0, ssim = 0, smooth = 0, pixel = 0;
  std::array<double, 3> feature_per_scale{};
  double feature = 0;
  double total = 0;
  std::int64_t m = 0;  // valid pixels summed over views
  std::int64_t n = 0;  // reference pixel count
  std::vector<ViewLoss> views;
};

/// Sum over source views of gamma1 L_pixel + gamma2 L_feature.
LossBreakdown total_loss(const View& ref, std::span<const View> sources, const DepthMap& depth,
                         const LossWeights& weights, const DepthRange& range);

struct LossAndGradient {
  LossBreakdown loss;
  DepthMap gradient;  // d(total)/d(depth), 1/mm
};

LossAndGradient total_loss_and_gradient(const View& ref, std::span<const View> sources,
                                        const DepthMap& depth, const LossWeights& weights,
                                        const DepthRange& range);

/// Discrete state of every non-smooth element of the objective: the
/// interpolation cell (or invalidity) of each warp at every scale and the
/// sign of every absolute-value argument. The loss is smooth in depth between
/// two depth maps with equal signatures.
std::vector<std::int64_t> loss_signature(const View& ref, std::span<const View> sources,
                                         const DepthMap& depth, const LossWeights& weights,
                                         const DepthRange& range);

}  // namespace mvs
