#include "mvs/refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvs {

void RefineConfig::validate() const {
  if (!(step > 0)) throw std::invalid_argument("RefineConfig: step must be positive");
  if (!(pixel_step > 0) || !(max_pixel_step >= pixel_step)) {
    throw std::invalid_argument("RefineConfig: need 0 < pixel_step <= max_pixel_step");
  }
  if (!(tolerance > 0)) throw std::invalid_argument("RefineConfig: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("RefineConfig: max_iterations must be >= 1");
  if (max_halvings < 0) throw std::invalid_argument("RefineConfig: max_halvings must be >= 0");
  if (!(clamp.min > 0) || !(clamp.max > clamp.min)) throw std::invalid_argument("RefineConfig: bad clamp range");
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

DepthMap loss_gradient(const DepthMap& depth, const View& ref, std::span<const View> sources,
                       const LossWeights& weights, const DepthRange& range) {
  return total_loss_and_gradient(ref, sources, depth, weights, range).gradient;
}

GradientReport finite_difference_gradient(const ScalarLoss& loss, const DepthMap& analytic, const DepthMap& depth,
                                          double step, std::span<const PixelIndex> samples,
                                          const SmoothnessTest& is_smooth) {
  if (!(step > 0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
  if (!analytic.same_shape(depth)) throw std::invalid_argument("finite_difference_gradient: gradient shape mismatch");
  GradientReport report;
  report.analytic = analytic;
  report.numeric = DepthMap(depth.height(), depth.width(), 1);
  double sum = 0;
  for (const PixelIndex& p : samples) {
    if (!depth.contains(p.y, p.x)) throw std::out_of_range("finite_difference_gradient: sample outside depth map");
    DepthMap plus = depth, minus = depth;
    plus(p.y, p.x) += step;
    minus(p.y, p.x) -= step;
    GradientSample s;
    s.pixel = p;
    s.analytic = analytic(p.y, p.x);
    s.numeric = (loss(plus) - loss(minus)) / (2 * step);
    s.relative_error = relative_error(s.analytic, s.numeric);
    s.excluded = is_smooth && !is_smooth(minus, plus);
    report.numeric(p.y, p.x) = s.numeric;
    if (!s.excluded) {
      ++report.admissible;
      sum += s.relative_error;
      report.max_relative_error = std::max(report.max_relative_error, s.relative_error);
    }
    report.samples.push_back(s);
  }
  if (report.admissible > 0) report.mean_relative_error = sum / report.admissible;
  return report;
}

GradientReport finite_difference_gradient(const DepthMap& depth, const View& ref, std::span<const View> sources,
                                          const LossWeights& weights, const DepthRange& range, double step,
                                          std::span<const PixelIndex> samples) {
  const DepthMap analytic = loss_gradient(depth, ref, sources, weights, range);
  const auto base = loss_signature(ref, sources, depth, weights, range);
  ScalarLoss loss = [&](const DepthMap& z) { return total_loss(ref, sources, z, weights, range).total; };
  SmoothnessTest smooth = [&](const DepthMap& lo, const DepthMap& hi) {
    return loss_signature(ref, sources, lo, weights, range) == base &&
           loss_signature(ref, sources, hi, weights, range) == base;
  };
  return finite_difference_gradient(loss, analytic, depth, step, samples, smooth);
}

namespace {

DepthMap clamped_step(const DepthMap& z, const DepthMap& g, double t, const DepthRange& r) {
  DepthMap out = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z.array()[i];
    if (!(v > 0)) continue;
    out.array()[i] = std::clamp(v - t * g.array()[i], r.min, r.max);
  }
  return out;
}

}  // namespace

RefineResult refine_depth_gd(const DepthMap& initial, const LossWithGradient& loss, const RefineConfig& cfg) {
  cfg.validate();
  const bool adaptive = cfg.method == RefineMethod::adaptive;
  RefineResult res;
  res.depth = clamped_step(initial, DepthMap(initial.height(), initial.width(), 1), 0.0, cfg.clamp);
  DepthMap grad(initial.height(), initial.width(), 1);
  DepthMap prev(initial.height(), initial.width(), 1);
  DepthMap steps(initial.height(), initial.width(), 1, cfg.pixel_step);
  double current = loss(res.depth, &grad);
  res.trace.push_back(current);

  // Gradient mode starts each search from twice the previous accepted step,
  // so the step can shrink below the 20-halving floor of cfg.step.
  double start = cfg.step;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    DepthMap dir = grad;
    if (adaptive) {
      for (Eigen::Index i = 0; i < grad.size(); ++i) {
        const double g = grad.array()[i], agree = g * prev.array()[i];
        double& s = steps.array()[i];
        if (agree > 0) s = std::min(s * 1.2, cfg.max_pixel_step);
        if (agree < 0) s *= 0.5;
        dir.array()[i] = s * static_cast<double>((g > 0) - (g < 0));
      }
    }
    double t = adaptive ? 1.0 : start;
    bool accepted = false;
    DepthMap candidate;
    double value = 0;
    for (int k = 0; k <= cfg.max_halvings; ++k, t *= 0.5) {
      candidate = clamped_step(res.depth, dir, t, cfg.clamp);
      value = loss(candidate, nullptr);
      if (value <= current) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double decrease = (current - value) / std::max(std::abs(current), 1e-300);
    if (decrease < cfg.tolerance) {
      res.converged = true;
      break;
    }
    if (adaptive) {
      steps.array() *= t;
    } else {
      start = std::min(cfg.step, 2 * t);
    }
    prev = grad;
    res.depth = std::move(candidate);
    current = loss(res.depth, &grad);
    res.trace.push_back(current);
    res.iterations = it + 1;
  }
  return res;
}

RefineResult refine_depth_gd(const DepthMap& initial, const View& ref, std::span<const View> sources,
                             const LossWeights& weights, const RefineConfig& cfg) {
  LossWithGradient fn = [&](const DepthMap& z, DepthMap* g) {
    if (!g) return total_loss(ref, sources, z, weights, cfg.clamp).total;
    auto lg = total_loss_and_gradient(ref, sources, z, weights, cfg.clamp);
    *g = std::move(lg.gradient);
    return lg.loss.total;
  };
  return refine_depth_gd(initial, fn, cfg);
}

}  // namespace mvs
