#include "mvs/fusion.hpp"

#include "mvs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace mvs {

void FusionConfig::validate() const {
  if (!(photometric_threshold >= 0 && photometric_threshold <= 1)) {
    throw std::invalid_argument("FusionConfig: photometric threshold must be in [0, 1]");
  }
  if (!(pixel_threshold > 0) || !(relative_depth_threshold > 0)) {
    throw std::invalid_argument("FusionConfig: geometric thresholds must be positive");
  }
  if (min_consistent_views < 1) throw std::invalid_argument("FusionConfig: min_consistent_views must be >= 1");
}

NearestNeighborIndex::NearestNeighborIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw std::invalid_argument("NearestNeighborIndex: empty point set");
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int NearestNeighborIndex::build(std::vector<int>& idx, int begin, int end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[mid], axis, -1, -1});
  const int left = build(idx, begin, mid, depth + 1);
  const int right = build(idx, mid + 1, end, depth + 1);
  nodes_[node].left = left;
  nodes_[node].right = right;
  return node;
}

void NearestNeighborIndex::search(int node, const Point3& q, double& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Point3& p = points_[n.point];
  best = std::min(best, squared_distance(q, p));
  const double diff = q[n.axis] - p[n.axis];
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best) search(far, q, best);
}

double NearestNeighborIndex::nearest_squared_distance(const Point3& q) const {
  double best = std::numeric_limits<double>::infinity();
  search(root_, q, best);
  return best;
}

double NearestNeighborIndex::nearest_distance(const Point3& q) const {
  return std::sqrt(nearest_squared_distance(q));
}

DepthMap filter_by_probability(const DepthMap& depth, const ProbabilityMap& prob, double threshold) {
  if (!depth.same_shape(prob)) throw std::invalid_argument("filter_by_probability: dimensions differ");
  DepthMap out = depth;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!(prob.array()[i] >= threshold)) out.array()[i] = 0.0;
  }
  return out;
}

namespace {

std::optional<std::array<int, 2>> nearest_pixel(const PixelCoord& p, int h, int w) {
  const long x = std::lround(p.x()), y = std::lround(p.y());
  if (x < 0 || x >= w || y < 0 || y >= h) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(y), static_cast<int>(x)};
}

// Projection of view i's pixel into view j as the nearest pixel of j.
std::optional<std::array<int, 2>> project_into(const DepthMap& depth_i, const CameraModel& cam_i, int y, int x,
                                               const DepthMap& depth_j, const CameraModel& cam_j) {
  const double z = depth_i(y, x);
  if (!(z > 0)) return std::nullopt;
  const Point3 world = cam_i.camera_to_world() * backproject<double>(PixelCoord(x, y), z, cam_i.intrinsics);
  const auto proj = try_project<double>(cam_j.world_to_camera * world, cam_j.intrinsics);
  if (!proj) return std::nullopt;
  return nearest_pixel(proj->pixel, depth_j.height(), depth_j.width());
}

Eigen::Vector3d pixel_color(const ImageGrid& img, int y, int x) {
  if (img.channels() >= 3) return {img(y, x, 0), img(y, x, 1), img(y, x, 2)};
  return Eigen::Vector3d::Constant(img(y, x, 0));
}

}  // namespace

bool consistent_in_view(const DepthMap& depth_i, const CameraModel& cam_i, int y, int x, const DepthMap& depth_j,
                        const CameraModel& cam_j, const FusionConfig& cfg) {
  const auto q = project_into(depth_i, cam_i, y, x, depth_j, cam_j);
  if (!q) return false;
  const double zj = depth_j((*q)[0], (*q)[1]);
  if (!(zj > 0)) return false;
  const Point3 world =
      cam_j.camera_to_world() * backproject<double>(PixelCoord((*q)[1], (*q)[0]), zj, cam_j.intrinsics);
  const auto back = try_project<double>(cam_i.world_to_camera * world, cam_i.intrinsics);
  if (!back) return false;
  const double zi = depth_i(y, x);
  return (back->pixel - PixelCoord(x, y)).norm() < cfg.pixel_threshold &&
         std::abs(back->depth - zi) / zi < cfg.relative_depth_threshold;
}

std::vector<BinaryMask> geometric_consistency_filter(std::span<const DepthMap> depths,
                                                     std::span<const CameraModel> cams, const FusionConfig& cfg) {
  cfg.validate();
  if (depths.size() != cams.size()) throw std::invalid_argument("geometric_consistency_filter: one camera per view");
  if (depths.empty()) return {};
  std::vector<BinaryMask> masks;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const DepthMap& d = depths[i];
    BinaryMask mask(d.height(), d.width(), 1);
    parallel_for(d.height(), [&](int y) {
      for (int x = 0; x < d.width(); ++x) {
        if (!(d(y, x) > 0)) continue;
        int agree = 0;
        for (std::size_t j = 0; j < depths.size(); ++j) {
          if (j != i && consistent_in_view(d, cams[i], y, x, depths[j], cams[j], cfg)) ++agree;
        }
        if (agree >= cfg.min_consistent_views - 1) mask(y, x) = 1.0;
      }
    });
    masks.push_back(std::move(mask));
  }
  return masks;
}

PointCloud fuse(std::span<const DepthMap> depths, std::span<const BinaryMask> masks,
                std::span<const CameraModel> cams, std::span<const ImageGrid> images, const FusionConfig& cfg) {
  if (depths.size() != masks.size() || depths.size() != cams.size()) {
    throw std::invalid_argument("fuse: depths, masks and cameras must have one entry per view");
  }
  if (!images.empty() && images.size() != depths.size()) throw std::invalid_argument("fuse: one image per view");
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (!depths[i].same_shape(masks[i])) throw std::invalid_argument("fuse: mask does not match depth map");
    if (!images.empty() && !images[i].same_extent(depths[i])) throw std::invalid_argument("fuse: image size mismatch");
  }
  const bool colored = !images.empty();
  std::vector<std::vector<char>> visited;
  for (const auto& d : depths) visited.emplace_back(static_cast<std::size_t>(d.pixels()), 0);

  PointCloud cloud;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const DepthMap& d = depths[i];
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        const auto pi = static_cast<std::size_t>(y) * d.width() + x;
        if (visited[i][pi] || !(masks[i](y, x) > 0) || !(d(y, x) > 0)) continue;
        visited[i][pi] = 1;
        Point3 sum = cams[i].camera_to_world() * backproject<double>(PixelCoord(x, y), d(y, x), cams[i].intrinsics);
        Eigen::Vector3d color = colored ? pixel_color(images[i], y, x) : Eigen::Vector3d::Zero();
        int n = 1;
        for (std::size_t j = 0; j < depths.size(); ++j) {
          if (j == i) continue;
          const auto q = project_into(d, cams[i], y, x, depths[j], cams[j]);
          if (!q) continue;
          const int qy = (*q)[0], qx = (*q)[1];
          const auto qj = static_cast<std::size_t>(qy) * depths[j].width() + qx;
          if (visited[j][qj] || !(masks[j](qy, qx) > 0)) continue;
          if (!consistent_in_view(d, cams[i], y, x, depths[j], cams[j], cfg)) continue;
          visited[j][qj] = 1;
          sum += cams[j].camera_to_world() *
                 backproject<double>(PixelCoord(qx, qy), depths[j](qy, qx), cams[j].intrinsics);
          if (colored) color += pixel_color(images[j], qy, qx);
          ++n;
        }
        cloud.points.push_back(sum / n);
        if (colored) cloud.colors.push_back(color / n);
      }
    }
  }
  return cloud;
}

MetricReport cloud_metrics(const PointCloud& estimated, const PointCloud& reference, double max_distance) {
  if (estimated.empty() || reference.empty()) throw std::invalid_argument("cloud_metrics: empty point cloud");
  if (!(max_distance > 0)) throw std::invalid_argument("cloud_metrics: max_distance must be positive");
  const NearestNeighborIndex ref_index(reference.points);
  const NearestNeighborIndex est_index(estimated.points);

  auto mean_distance = [&](const PointCloud& from, const NearestNeighborIndex& to) {
    std::vector<double> dist(from.size());
    parallel_for(static_cast<int>(from.size()), [&](int i) {
      dist[static_cast<std::size_t>(i)] = std::min(to.nearest_distance(from.points[static_cast<std::size_t>(i)]), max_distance);
    });
    double s = 0;
    for (double v : dist) s += v;
    return s / static_cast<double>(dist.size());
  };
  MetricReport r;
  r.accuracy = mean_distance(estimated, ref_index);
  r.completeness = mean_distance(reference, est_index);
  r.overall = 0.5 * (r.accuracy + r.completeness);
  return r;
}

std::vector<double> depth_error_percentages(const DepthMap& est, const DepthMap& gt, std::span<const double> thresholds,
                                            const BinaryMask* region) {
  if (!est.same_shape(gt)) throw std::invalid_argument("depth_error_percentages: dimensions differ");
  if (region && !region->same_shape(gt)) throw std::invalid_argument("depth_error_percentages: region size mismatch");
  std::vector<std::int64_t> below(thresholds.size(), 0);
  std::int64_t valid = 0;
  for (Eigen::Index i = 0; i < est.size(); ++i) {
    const double e = est.array()[i], g = gt.array()[i];
    if (!(e > 0) || !(g > 0)) continue;
    if (region && !(region->array()[i] > 0)) continue;
    ++valid;
    const double err = std::abs(e - g);
    for (std::size_t k = 0; k < thresholds.size(); ++k) below[k] += err < thresholds[k] ? 1 : 0;
  }
  if (valid == 0) throw std::invalid_argument("depth_error_percentages: no jointly valid pixel");
  std::vector<double> pct;
  for (auto b : below) pct.push_back(100.0 * static_cast<double>(b) / static_cast<double>(valid));
  return pct;
}

PointCloud depth_to_cloud(const DepthMap& depth, const CameraModel& cam, const ImageGrid* image) {
  PointCloud cloud;
  const RigidTransform to_world = cam.camera_to_world();
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!(depth(y, x) > 0)) continue;
      cloud.points.push_back(to_world * backproject<double>(PixelCoord(x, y), depth(y, x), cam.intrinsics));
      if (image) cloud.colors.push_back(pixel_color(*image, y, x));
    }
  }
  return cloud;
}

}  // namespace mvs
