#pragma once

#include "mvs/config.hpp"
#include "mvs/fusion.hpp"
#include "mvs/image.hpp"
#include "mvs/loss.hpp"
#include "mvs/refine.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mvs {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level from MVSKIT_LOG (error, info or debug); info when unset. An
/// unrecognised value falls back to info with a warning.
LogLevel log_level();
/// Writes "[level] message" to stderr when `level` is enabled.
void log(LogLevel level, const std::string& message);

struct DepthEstimate {
  DepthMap depth;
  ProbabilityMap probability;
};

/// Features at cfg.depth.level, plane sweep, box regularisation, softmax and
/// soft argmin. `cams[0]` belongs to `images[0]`, the reference. Results at
/// a coarser level are replicated back to full resolution.
DepthEstimate estimate_depth(std::span<const ImageGrid> images, std::span<const CameraModel> cams,
                             const PipelineConfig& cfg);

/// One normal-depth refinement with the configured alpha1 and iteration count.
DepthMap refine_normal_depth(const DepthMap& depth, const CameraModel& cam, const ImageGrid& image,
                             const PipelineConfig& cfg);

/// Views for the loss, reference first.
std::vector<View> make_views(std::span<const ImageGrid> images, std::span<const CameraModel> cams,
                             const FeatureConfig& features);

/// Random two-view instance for gradient checks: independent uniform images,
/// depths in [550, 650] mm and a translated source camera giving up to
/// about two pixels of disparity, all drawn from Lcg(seed).
struct RandomInstance {
  std::vector<View> views;  // reference first
  DepthMap depth;
};
RandomInstance random_instance(std::uint64_t seed, int size = 8, const FeatureConfig& features = {});

/// Pixels where the ground truth is valid and its reprojection lands inside
/// at least one source image, eroded by `border` pixels (the image edge counts
/// as outside). This is the region depth statistics are reported on.
BinaryMask interior_mask(const DepthMap& gt, const CameraModel& ref, std::span<const CameraModel> sources,
                         int border);

struct FusionOutput {
  PointCloud cloud;
  std::int64_t surviving = 0;  // pixels passing both filters, summed over views
};

/// Photometric filter on `probs` (skipped for a view whose map is empty),
/// geometric filter on the unfiltered depths, then fuse(). Judging geometric
/// agreement before the photometric cut means a higher threshold only ever
/// removes pixels.
FusionOutput filter_and_fuse(std::span<const DepthMap> depths, std::span<const ProbabilityMap> probs,
                             std::span<const CameraModel> cams, std::span<const ImageGrid> images,
                             const FusionConfig& cfg);

/// Union of the back-projected ground-truth depth maps.
PointCloud ground_truth_cloud(std::span<const DepthMap> gts, std::span<const CameraModel> cams);

}  // namespace mvs
