#include "mvs/pipeline.hpp"

#include "mvs/features.hpp"
#include "mvs/normal_depth.hpp"
#include "mvs/plane_sweep.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace mvs {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MVSKIT_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    std::cerr << "[info] MVSKIT_LOG='" << v << "' is not one of error, info, debug; using info\n";
    return LogLevel::info;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

DepthEstimate estimate_depth(std::span<const ImageGrid> images, std::span<const CameraModel> cams,
                             const PipelineConfig& cfg) {
  if (images.size() < 2) throw std::invalid_argument("estimate_depth: need a reference and at least one source view");
  if (images.size() != cams.size()) throw std::invalid_argument("estimate_depth: one camera per image");
  const int level = cfg.depth.level;

  std::vector<ImageGrid> feats;
  std::vector<CameraModel> scaled;
  for (std::size_t i = 0; i < images.size(); ++i) {
    ImageGrid luma = to_luma(images[i]);
    for (int l = 0; l < level; ++l) luma = downsample_half(luma);
    feats.push_back(feature_map(luma, cfg.features));
    scaled.push_back(cams[i].downscaled(level));
  }
  const DepthHypotheses hyp(cfg.depth.min, cfg.depth.max, cfg.depth.samples);
  SweepConfig sweep;
  sweep.invalid_cost = cfg.depth.invalid_cost;
  log(LogLevel::debug, "plane sweep: " + std::to_string(hyp.count()) + " hypotheses at " +
                           std::to_string(feats[0].width()) + "x" + std::to_string(feats[0].height()));
  CostVolume cost = build_cost_volume(feats[0], std::span<const ImageGrid>(feats).subspan(1), scaled, hyp, sweep);
  cost = regularize_volume(cost, cfg.depth.regularize_radius, cfg.depth.regularize_passes);
  const ProbabilityVolume prob = softmax_probability(cost, cfg.depth.temperature);
  DepthEstimate est{soft_argmin(prob, hyp), {}};
  est.probability = probability_map(prob, est.depth, hyp, cfg.depth.probability_window);
  if (level == 0) return est;

  // Replicate each coarse pixel over its block; rows/columns past the last
  // full block take the nearest block.
  const int h = images[0].height(), w = images[0].width(), f = 1 << level;
  DepthEstimate full{DepthMap(h, w, 1), ProbabilityMap(h, w, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      full.depth(y, x) = est.depth.clamped(y / f, x / f);
      full.probability(y, x) = est.probability.clamped(y / f, x / f);
    }
  }
  return full;
}

DepthMap refine_normal_depth(const DepthMap& depth, const CameraModel& cam, const ImageGrid& image,
                             const PipelineConfig& cfg) {
  return refine_depth_nd(depth, cam.intrinsics, to_luma(image), cfg.normal_depth.alpha1,
                         cfg.normal_depth.iterations, cfg.depth.range());
}

std::vector<View> make_views(std::span<const ImageGrid> images, std::span<const CameraModel> cams,
                             const FeatureConfig& features) {
  if (images.size() != cams.size()) throw std::invalid_argument("make_views: one camera per image");
  std::vector<View> views;
  for (std::size_t i = 0; i < images.size(); ++i) views.push_back(make_view(images[i], cams[i], features));
  return views;
}

RandomInstance random_instance(std::uint64_t seed, int size, const FeatureConfig& features) {
  Lcg rng(seed);
  const double f = 2.0 * size;
  const double c = (size - 1) / 2.0;
  const CameraModel ref{CameraIntrinsics(f, f, c, c, size, size), RigidTransform::identity()};
  const Point3 t(rng.uniform(-60, 60), rng.uniform(-30, 30), rng.uniform(-20, 20));
  const CameraModel src{ref.intrinsics, RigidTransform::translate(t)};
  auto random_image = [&] {
    ImageGrid img(size, size, 3);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.array()[i] = rng.uniform();
    return img;
  };
  RandomInstance inst;
  const ImageGrid a = random_image(), b = random_image();
  inst.views.push_back(make_view(a, ref, features));
  inst.views.push_back(make_view(b, src, features));
  inst.depth = DepthMap(size, size, 1);
  for (Eigen::Index i = 0; i < inst.depth.size(); ++i) inst.depth.array()[i] = rng.uniform(550, 650);
  return inst;
}

BinaryMask interior_mask(const DepthMap& gt, const CameraModel& ref, std::span<const CameraModel> sources,
                         int border) {
  const int h = gt.height(), w = gt.width();
  BinaryMask covisible(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(gt(y, x) > 0)) continue;
      for (const auto& src : sources) {
        const auto tr = transfer_pixel(PixelCoord(x, y), gt(y, x), ref.intrinsics, src.intrinsics,
                                       relative_transform(ref, src));
        const auto& k = src.intrinsics;
        if (tr.valid && tr.pixel.x() >= 0 && tr.pixel.x() <= k.width - 1 && tr.pixel.y() >= 0 &&
            tr.pixel.y() <= k.height - 1) {
          covisible(y, x) = 1;
          break;
        }
      }
    }
  }
  BinaryMask out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool keep = true;
      for (int dy = -border; dy <= border && keep; ++dy) {
        for (int dx = -border; dx <= border && keep; ++dx) {
          keep = covisible.contains(y + dy, x + dx) && covisible(y + dy, x + dx) > 0;
        }
      }
      out(y, x) = keep ? 1 : 0;
    }
  }
  return out;
}

FusionOutput filter_and_fuse(std::span<const DepthMap> depths, std::span<const ProbabilityMap> probs,
                             std::span<const CameraModel> cams, std::span<const ImageGrid> images,
                             const FusionConfig& cfg) {
  if (probs.size() != depths.size()) throw std::invalid_argument("filter_and_fuse: one probability map per depth map");
  std::vector<DepthMap> filtered;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    filtered.push_back(probs[i].empty() ? depths[i]
                                        : filter_by_probability(depths[i], probs[i], cfg.photometric_threshold));
  }
  const auto geo = geometric_consistency_filter(depths, cams, cfg);
  FusionOutput out;
  std::vector<BinaryMask> masks;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    BinaryMask m = geo[i];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      if (!(filtered[i].array()[k] > 0)) m.array()[k] = 0;
      out.surviving += m.array()[k] > 0 ? 1 : 0;
    }
    masks.push_back(std::move(m));
  }
  out.cloud = fuse(filtered, masks, cams, images, cfg);
  return out;
}

PointCloud ground_truth_cloud(std::span<const DepthMap> gts, std::span<const CameraModel> cams) {
  if (gts.size() != cams.size()) throw std::invalid_argument("ground_truth_cloud: one camera per depth map");
  PointCloud ref;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto part = depth_to_cloud(gts[i], cams[i]);
    ref.points.insert(ref.points.end(), part.points.begin(), part.points.end());
  }
  return ref;
}

}  // namespace mvs
