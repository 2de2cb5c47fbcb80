#include "mvs/plane_sweep.hpp"

#include "mvs/parallel.hpp"
#include "mvs/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mvs {

DepthHypotheses::DepthHypotheses(double d_min, double d_max, int count) {
  if (!(d_min > 0) || !(d_max > d_min)) {
    throw std::invalid_argument("DepthHypotheses: require 0 < d_min < d_max");
  }
  if (count < 2) throw std::invalid_argument("DepthHypotheses: need at least 2 hypotheses");
  values_.resize(static_cast<std::size_t>(count));
  const double step = (d_max - d_min) / (count - 1);
  for (int i = 0; i < count; ++i) values_[static_cast<std::size_t>(i)] = d_min + i * step;
  values_.back() = d_max;
}

CostVolume build_cost_volume(const ImageGrid& ref_feat, std::span<const ImageGrid> src_feats,
                             std::span<const CameraModel> cams, const DepthHypotheses& hyp,
                             const SweepConfig& cfg) {
  if (src_feats.empty()) throw std::invalid_argument("build_cost_volume: no source views");
  if (cams.size() != src_feats.size() + 1) {
    throw std::invalid_argument("build_cost_volume: expected one camera per view (reference first)");
  }
  const int h = ref_feat.height(), w = ref_feat.width(), c = ref_feat.channels();
  for (const auto& f : src_feats) {
    if (!f.same_shape(ref_feat)) {
      throw std::invalid_argument("build_cost_volume: source feature map resolution or channels differ");
    }
  }
  for (const auto& cam : cams) {
    if (cam.intrinsics.width != w || cam.intrinsics.height != h) {
      throw std::invalid_argument("build_cost_volume: intrinsics not at feature resolution");
    }
  }

  std::vector<RigidTransform> rel;
  for (std::size_t i = 0; i < src_feats.size(); ++i) rel.push_back(relative_transform(cams[0], cams[i + 1]));

  const int nviews = static_cast<int>(src_feats.size()) + 1;
  CostVolume cost(hyp.count(), h, w);
  parallel_for(hyp.count(), [&](int d) {
    std::vector<WarpResult> warped;
    warped.reserve(src_feats.size());
    for (std::size_t i = 0; i < src_feats.size(); ++i) {
      warped.push_back(warp_image_at_depth(src_feats[i], hyp[d], h, w, cams[0].intrinsics,
                                           cams[i + 1].intrinsics, rel[i]));
    }
    std::vector<double> vals(static_cast<std::size_t>(nviews));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int n = 1;
        for (const auto& wr : warped) n += wr.mask(y, x) > 0 ? 1 : 0;
        if (n < 2) {
          cost(d, y, x) = cfg.invalid_cost;
          continue;
        }
        double total = 0;
        for (int k = 0; k < c; ++k) {
          std::size_t m = 0;
          vals[m++] = ref_feat(y, x, k);
          for (const auto& wr : warped) {
            if (wr.mask(y, x) > 0) vals[m++] = wr.image(y, x, k);
          }
          // Sorting makes the sums independent of source order.
          std::sort(vals.begin(), vals.begin() + static_cast<long>(m));
          double mean = 0;
          for (std::size_t j = 0; j < m; ++j) mean += vals[j];
          mean /= static_cast<double>(m);
          double var = 0;
          for (std::size_t j = 0; j < m; ++j) var += (vals[j] - mean) * (vals[j] - mean);
          total += var / static_cast<double>(m);
        }
        cost(d, y, x) = total / c;
      }
    }
  });
  return cost;
}

namespace {

// One truncated box pass along an axis; strides describe the axis layout.
void box_pass(const CostVolume& in, CostVolume& out, int radius, int axis) {
  const int dd = in.depth(), h = in.height(), w = in.width();
  parallel_for(dd, [&](int d) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0;
        int n = 0;
        for (int o = -radius; o <= radius; ++o) {
          int d2 = d, y2 = y, x2 = x;
          if (axis == 0) d2 += o;
          if (axis == 1) y2 += o;
          if (axis == 2) x2 += o;
          if (d2 < 0 || d2 >= dd || y2 < 0 || y2 >= h || x2 < 0 || x2 >= w) continue;
          s += in(d2, y2, x2);
          ++n;
        }
        out(d, y, x) = s / n;
      }
    }
  });
}

}  // namespace

CostVolume regularize_volume(const CostVolume& cost, int radius, int passes) {
  if (radius < 0 || passes < 0) throw std::invalid_argument("regularize_volume: negative radius or passes");
  CostVolume cur = cost;
  if (radius == 0) return cur;
  CostVolume tmp = cost;
  for (int p = 0; p < passes; ++p) {
    box_pass(cur, tmp, radius, 2);
    box_pass(tmp, cur, radius, 1);
    box_pass(cur, tmp, radius, 0);
    std::swap(cur, tmp);
  }
  return cur;
}

ProbabilityVolume softmax_probability(const CostVolume& cost, double temperature) {
  if (!(temperature > 0)) throw std::invalid_argument("softmax_probability: temperature must be positive");
  const int dd = cost.depth(), h = cost.height(), w = cost.width();
  ProbabilityVolume prob(dd, h, w);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double lo = cost(0, y, x);
      for (int d = 1; d < dd; ++d) lo = std::min(lo, cost(d, y, x));
      double z = 0;
      for (int d = 0; d < dd; ++d) {
        const double e = std::exp(-(cost(d, y, x) - lo) / temperature);
        prob(d, y, x) = e;
        z += e;
      }
      for (int d = 0; d < dd; ++d) prob(d, y, x) /= z;
    }
  });
  return prob;
}

DepthMap soft_argmin(const ProbabilityVolume& prob, const DepthHypotheses& hyp) {
  if (prob.depth() != hyp.count()) throw std::invalid_argument("soft_argmin: hypothesis count mismatch");
  const int h = prob.height(), w = prob.width();
  DepthMap depth(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double z = 0;
      for (int d = 0; d < hyp.count(); ++d) z += hyp[d] * prob(d, y, x);
      depth(y, x) = std::clamp(z, hyp.min(), hyp.max());
    }
  }
  return depth;
}

CostVolume soft_argmin_cost_gradient(const CostVolume& cost, const DepthHypotheses& hyp,
                                     double temperature) {
  const ProbabilityVolume prob = softmax_probability(cost, temperature);
  const DepthMap z = soft_argmin(prob, hyp);
  CostVolume grad(cost.depth(), cost.height(), cost.width());
  for (int d = 0; d < cost.depth(); ++d) {
    for (int y = 0; y < cost.height(); ++y) {
      for (int x = 0; x < cost.width(); ++x) {
        grad(d, y, x) = -prob(d, y, x) * (hyp[d] - z(y, x)) / temperature;
      }
    }
  }
  return grad;
}

ProbabilityMap probability_map(const ProbabilityVolume& prob, const DepthMap& depth,
                               const DepthHypotheses& hyp, int window) {
  if (window < 1) throw std::invalid_argument("probability_map: window must be >= 1");
  if (prob.depth() != hyp.count() || depth.height() != prob.height() || depth.width() != prob.width()) {
    throw std::invalid_argument("probability_map: volume and depth map do not match");
  }
  const int dd = hyp.count();
  const int win = std::min(window, dd);
  ProbabilityMap out(depth.height(), depth.width(), 1);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double u = (depth(y, x) - hyp.min()) / hyp.spacing();
      int start = static_cast<int>(std::lround(u - 0.5 * (win - 1)));
      start = std::clamp(start, 0, dd - win);
      double s = 0;
      for (int d = start; d < start + win; ++d) s += prob(d, y, x);
      out(y, x) = std::clamp(s, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace mvs
