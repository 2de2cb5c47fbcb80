#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace mvs {

struct PointCloud {
  std::vector<Point3> points;     // world frame, mm
  std::vector<Eigen::Vector3d> colors;  // empty or one rgb in [0, 1] per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
};

struct FusionConfig {
  double photometric_threshold = 0.6;
  double pixel_threshold = 1.0;      // px
  double relative_depth_threshold = 0.01;
  int min_consistent_views = 2;

  void validate() const;
};

struct MetricReport {
  double accuracy = 0;
  double completeness = 0;
  double overall = 0;
  std::vector<double> thresholds;   // mm
  std::vector<double> percentages;  // depth error below each threshold, in [0, 100]
};

/// Exact Euclidean nearest neighbour over a fixed point set (k-d tree).
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Point3> points);

  /// Squared distance to the closest indexed point.
  double nearest_squared_distance(const Point3& q) const;
  double nearest_distance(const Point3& q) const;

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>& idx, int begin, int end, int depth);
  void search(int node, const Point3& q, double& best) const;

  std::vector<Point3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Squared Euclidean distance, evaluated in a fixed order so that every
/// caller obtains bit-identical results.
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Keeps depth where prob >= threshold, otherwise sets 0.
DepthMap filter_by_probability(const DepthMap& depth, const ProbabilityMap& prob, double threshold);

/// True when pixel (y, x) of `depth_i` reprojects through view j's depth back
/// to within the pixel and relative-depth thresholds.
bool consistent_in_view(const DepthMap& depth_i, const CameraModel& cam_i, int y, int x, const DepthMap& depth_j,
                        const CameraModel& cam_j, const FusionConfig& cfg);

/// Per-view masks of pixels consistent with at least min_consistent_views - 1
/// other views.
std::vector<BinaryMask> geometric_consistency_filter(std::span<const DepthMap> depths,
                                                     std::span<const CameraModel> cams, const FusionConfig& cfg);

/// Back-projects surviving pixels to the world frame. Views are visited in
/// index order; each unvisited pixel opens a group that absorbs the
/// consistent, still-unvisited pixels it projects onto in the other views,
/// and the group is emitted as the mean point and colour.
PointCloud fuse(std::span<const DepthMap> depths, std::span<const BinaryMask> masks,
                std::span<const CameraModel> cams, std::span<const ImageGrid> images, const FusionConfig& cfg = {});

/// Accuracy (estimate -> reference), completeness (reference -> estimate) and
/// their mean, with every distance clipped at max_distance.
MetricReport cloud_metrics(const PointCloud& estimated, const PointCloud& reference, double max_distance = 20.0);

/// 100 * fraction of jointly valid pixels with |est - gt| < t, per threshold.
std::vector<double> depth_error_percentages(const DepthMap& est, const DepthMap& gt, std::span<const double> thresholds,
                                            const BinaryMask* region = nullptr);

/// World-frame points of every valid pixel of one depth map.
PointCloud depth_to_cloud(const DepthMap& depth, const CameraModel& cam, const ImageGrid* image = nullptr);

}  // namespace mvs
