#pragma once

#include "mvs/image.hpp"
#include "mvs/loss.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mvs {

enum class RefineMethod {
  gradient,  // one global step along the negative gradient
  adaptive,  // per-pixel step along the negative gradient sign
};

struct RefineConfig {
  RefineMethod method = RefineMethod::adaptive;
  double step = 1e7;  // gradient: mm per unit gradient, first trial of each line search
  double pixel_step = 1.0;      // adaptive: initial per-pixel step, mm
  double max_pixel_step = 50.0;  // adaptive: cap on a pixel's step, mm
  int max_iterations = 200;
  double tolerance = 1e-6;  // stop when the relative loss decrease falls below this
  int max_halvings = 20;
  DepthRange clamp;

  void validate() const;
};

struct PixelIndex {
  int y = 0;
  int x = 0;
};

struct GradientSample {
  PixelIndex pixel;
  double analytic = 0;
  double numeric = 0;
  double relative_error = 0;
  bool excluded = false;  // the loss is not smooth across [z - h, z + h]
};

struct GradientReport {
  DepthMap analytic;                    // full analytic gradient
  DepthMap numeric;                     // numeric gradient at sampled pixels, 0 elsewhere
  std::vector<GradientSample> samples;  // in input order
  double max_relative_error = 0;        // over admissible samples
  double mean_relative_error = 0;
  int admissible = 0;
};

/// |a - b| / max(|a|, |b|, 1e-12).
double relative_error(double a, double b);

/// d(total_loss)/d(depth) at every pixel.
DepthMap loss_gradient(const DepthMap& depth, const View& ref, std::span<const View> sources,
                       const LossWeights& weights, const DepthRange& range);

using ScalarLoss = std::function<double(const DepthMap&)>;
/// Returns true when the loss is smooth between the two depth maps.
using SmoothnessTest = std::function<bool(const DepthMap&, const DepthMap&)>;

/// Central differences (L(z + h) - L(z - h)) / 2h at the sampled pixels of an
/// arbitrary loss, compared against `analytic`. Samples for which
/// `is_smooth(z - h, z + h)` is false are reported but excluded from the
/// error statistics.
GradientReport finite_difference_gradient(const ScalarLoss& loss, const DepthMap& analytic, const DepthMap& depth,
                                          double step, std::span<const PixelIndex> samples,
                                          const SmoothnessTest& is_smooth = {});

/// Same check for the multi-view objective; smoothness is decided by
/// comparing loss signatures.
GradientReport finite_difference_gradient(const DepthMap& depth, const View& ref, std::span<const View> sources,
                                          const LossWeights& weights, const DepthRange& range, double step,
                                          std::span<const PixelIndex> samples);

struct RefineResult {
  DepthMap depth;
  std::vector<double> trace;  // loss of every accepted iterate, starting with the input
  int iterations = 0;
  bool converged = false;
};

/// Descent with backtracking on the objective. Each iteration halves the
/// trial step until the loss does not increase (up to max_halvings); depths
/// stay inside cfg.clamp, and invalid (zero) pixels are left alone.
///
/// `gradient` moves every pixel by t * g. `adaptive` moves pixel i by
/// t * s_i * sign(g_i), where s_i grows by 1.2 while g_i keeps its sign and
/// halves when it flips; a backtracked t is folded into every s_i. The L1
/// terms make the objective stiff and kinked, and a single global step stalls
/// as soon as the stiffest pixel sits at a kink.
RefineResult refine_depth_gd(const DepthMap& initial, const View& ref, std::span<const View> sources,
                             const LossWeights& weights, const RefineConfig& cfg);

/// Same loop over an arbitrary differentiable loss.
using LossWithGradient = std::function<double(const DepthMap&, DepthMap*)>;
RefineResult refine_depth_gd(const DepthMap& initial, const LossWithGradient& loss, const RefineConfig& cfg);

}  // namespace mvs
