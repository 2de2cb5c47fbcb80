#include "mvs/loss.hpp"

#include "mvs/parallel.hpp"
#include "mvs/warp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mvs {

void LossWeights::validate() const {
  for (double v : {gamma1, gamma2, lambda1, lambda2, lambda3, beta1, beta2, beta3, alpha2, alpha3}) {
    if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
  }
}

namespace {

using Signature = std::vector<std::int64_t>;

inline double sgn(double v) { return (v > 0) - (v < 0); }

void require_same(const ImageGrid& a, const ImageGrid& b, const BinaryMask& mask, const char* who) {
  if (!a.same_shape(b) || !a.same_extent(mask) || mask.channels() != 1) {
    throw std::invalid_argument(std::string(who) + ": image and mask dimensions do not match");
  }
}

MaskedLoss photometric_impl(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                            bool with_gradient, Signature* sig) {
  require_same(ref, warped, mask, "photometric_loss");
  const int h = ref.height(), w = ref.width(), c = ref.channels();
  MaskedLoss out;
  if (with_gradient) out.gradient = ImageGrid(h, w, c);

  // Per-row partial sums keep the reduction order fixed regardless of threads.
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.count += mask(y, x) > 0 ? 1 : 0;
  }
  parallel_for(h, [&](int y) {
    double s = 0;
    for (int x = 0; x < w; ++x) {
      if (!(mask(y, x) > 0)) continue;
      for (int k = 0; k < c; ++k) s += std::abs(ref(y, x, k) - warped(y, x, k));
      if (x + 1 < w && mask(y, x + 1) > 0) {
        for (int k = 0; k < c; ++k) {
          s += std::abs((ref(y, x + 1, k) - ref(y, x, k)) - (warped(y, x + 1, k) - warped(y, x, k)));
        }
      }
      if (y + 1 < h && mask(y + 1, x) > 0) {
        for (int k = 0; k < c; ++k) {
          s += std::abs((ref(y + 1, x, k) - ref(y, x, k)) - (warped(y + 1, x, k) - warped(y, x, k)));
        }
      }
    }
    row_sum[static_cast<std::size_t>(y)] = s;
  });
  if (out.count == 0) return out;
  double total = 0;
  for (double s : row_sum) total += s;
  out.value = total / static_cast<double>(out.count);

  if (!with_gradient && !sig) return out;
  const double inv_m = 1.0 / static_cast<double>(out.count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(mask(y, x) > 0)) continue;
      for (int k = 0; k < c; ++k) {
        const double s0 = sgn(ref(y, x, k) - warped(y, x, k));
        if (sig) sig->push_back(static_cast<std::int64_t>(s0));
        if (with_gradient) out.gradient(y, x, k) -= s0 * inv_m;
      }
      const int nbr[2][2] = {{0, 1}, {1, 0}};
      for (const auto& d : nbr) {
        const int yy = y + d[0], xx = x + d[1];
        if (yy >= h || xx >= w || !(mask(yy, xx) > 0)) continue;
        for (int k = 0; k < c; ++k) {
          const double g = sgn((ref(yy, xx, k) - ref(y, x, k)) - (warped(yy, xx, k) - warped(y, x, k)));
          if (sig) sig->push_back(static_cast<std::int64_t>(g));
          if (with_gradient) {
            out.gradient(yy, xx, k) -= g * inv_m;
            out.gradient(y, x, k) += g * inv_m;
          }
        }
      }
    }
  }
  return out;
}

// Window statistics and SSIM partials for one pixel and channel.
struct SsimTerms {
  double s = 1;
  double d_mu_y = 0, d_eyy = 0, d_exy = 0;  // dS / d(window moments of warped)
  int n = 0;
};

SsimTerms ssim_terms(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask, int y, int x,
                     int k) {
  SsimTerms t;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int yy = y + dy, xx = x + dx;
      if (!mask.contains(yy, xx) || !(mask(yy, xx) > 0)) continue;
      const double a = ref(yy, xx, k), b = warped(yy, xx, k);
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
      ++t.n;
    }
  }
  const double inv = 1.0 / t.n;
  const double mx = sx * inv, my = sy * inv;
  const double vx = sxx * inv - mx * mx, vy = syy * inv - my * my, cxy = sxy * inv - mx * my;
  const double a = 2 * mx * my + kSsimC1;
  const double b = 2 * cxy + kSsimC2;
  const double cc = mx * mx + my * my + kSsimC1;
  const double d = vx + vy + kSsimC2;
  const double num = a * b, den = cc * d;
  t.s = num / den;
  const double den2 = den * den;
  {
    const double dnum = 2 * mx * b + a * (-2 * mx);
    const double dden = 2 * my * d + cc * (-2 * my);
    t.d_mu_y = (dnum * den - num * dden) / den2;
  }
  t.d_eyy = -num * cc / den2;
  t.d_exy = 2 * a / den;
  return t;
}

MaskedLoss ssim_impl(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                     bool with_gradient) {
  require_same(ref, warped, mask, "ssim_loss");
  const int h = ref.height(), w = ref.width(), c = ref.channels();
  MaskedLoss out;
  if (with_gradient) out.gradient = ImageGrid(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.count += mask(y, x) > 0 ? 1 : 0;
  }
  if (out.count == 0) return out;

  std::vector<SsimTerms> terms(static_cast<std::size_t>(h) * w * c);
  std::vector<double> row_sum(static_cast<std::size_t>(h), 0.0);
  parallel_for(h, [&](int y) {
    double s = 0;
    for (int x = 0; x < w; ++x) {
      if (!(mask(y, x) > 0)) continue;
      for (int k = 0; k < c; ++k) {
        const SsimTerms t = ssim_terms(ref, warped, mask, y, x, k);
        terms[static_cast<std::size_t>(ref.index(y, x, k))] = t;
        s += 0.5 * (1.0 - t.s);
      }
    }
    row_sum[static_cast<std::size_t>(y)] = s;
  });
  double total = 0;
  for (double s : row_sum) total += s;
  const double scale = 1.0 / (static_cast<double>(out.count) * c);
  out.value = total * scale;

  if (!with_gradient) return out;
  // Gather: warped(q) enters the window of every masked p in its 3x3.
  parallel_for(h, [&](int qy) {
    for (int qx = 0; qx < w; ++qx) {
      if (!(mask(qy, qx) > 0)) continue;
      for (int k = 0; k < c; ++k) {
        const double yq = warped(qy, qx, k), xq = ref(qy, qx, k);
        double g = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int py = qy + dy, px = qx + dx;
            if (!mask.contains(py, px) || !(mask(py, px) > 0)) continue;
            const SsimTerms& t = terms[static_cast<std::size_t>(ref.index(py, px, k))];
            g += (t.d_mu_y + 2 * yq * t.d_eyy + xq * t.d_exy) / t.n;
          }
        }
        out.gradient(qy, qx, k) = -0.5 * scale * g;
      }
    }
  });
  return out;
}

MaskedLoss smoothness_impl(const DepthMap& depth, const ImageGrid& luma, double alpha2, double alpha3,
                           const DepthRange& range, bool with_gradient, Signature* sig) {
  if (depth.channels() != 1 || luma.channels() != 1 || !depth.same_extent(luma)) {
    throw std::invalid_argument("smoothness_loss: depth and single-channel image must share dimensions");
  }
  if (!(range.span() > 0)) throw std::invalid_argument("smoothness_loss: empty depth range");
  const int h = depth.height(), w = depth.width();
  const double scale = 1.0 / range.span();
  MaskedLoss out;
  out.count = static_cast<std::int64_t>(h) * w;
  if (with_gradient) out.gradient = DepthMap(h, w, 1);
  const double inv_n = 1.0 / static_cast<double>(out.count);

  auto valid = [&](int y, int x) { return depth.contains(y, x) && depth(y, x) > 0; };
  double total = 0;
  const int axes[2][2] = {{0, 1}, {1, 0}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(y, x)) continue;
      for (const auto& a : axes) {
        const int y1 = y + a[0], x1 = x + a[1];
        const int y0 = y - a[0], x0 = x - a[1];
        if (valid(y1, x1)) {
          const double wgt = std::exp(-alpha2 * std::abs(luma(y1, x1) - luma(y, x)));
          const double diff = (depth(y1, x1) - depth(y, x)) * scale;
          total += wgt * std::abs(diff);
          if (sig) sig->push_back(static_cast<std::int64_t>(sgn(diff)));
          if (with_gradient) {
            const double g = wgt * sgn(diff) * scale * inv_n;
            out.gradient(y1, x1) += g;
            out.gradient(y, x) -= g;
          }
        }
        if (valid(y1, x1) && valid(y0, x0)) {
          const double wgt = std::exp(-alpha3 * std::abs(luma(y1, x1) - 2 * luma(y, x) + luma(y0, x0)));
          const double diff = (depth(y1, x1) - 2 * depth(y, x) + depth(y0, x0)) * scale;
          total += wgt * std::abs(diff);
          if (sig) sig->push_back(static_cast<std::int64_t>(sgn(diff)));
          if (with_gradient) {
            const double g = wgt * sgn(diff) * scale * inv_n;
            out.gradient(y1, x1) += g;
            out.gradient(y0, x0) += g;
            out.gradient(y, x) -= 2 * g;
          }
        }
      }
    }
  }
  out.value = total * inv_n;
  return out;
}

MaskedLoss feature_scale_impl(const ImageGrid& ref_feat, const ImageGrid& src_feat, const DepthMap& depth,
                              const CameraModel& ref_cam, const CameraModel& src_cam, int level, int border,
                              bool with_gradient, Signature* sig) {
  if (level < 0) throw std::invalid_argument("feature_loss_scale: negative level");
  if (ref_feat.channels() != src_feat.channels()) {
    throw std::invalid_argument("feature_loss_scale: feature channel counts differ");
  }
  const CameraIntrinsics k_ref = ref_cam.intrinsics.downscaled(level);
  const CameraIntrinsics k_src = src_cam.intrinsics.downscaled(level);
  if (ref_feat.width() != k_ref.width || ref_feat.height() != k_ref.height ||
      src_feat.width() != k_src.width || src_feat.height() != k_src.height) {
    throw std::invalid_argument("feature_loss_scale: feature maps do not match level " + std::to_string(level));
  }
  const DepthMap z_level = downsample_depth(depth, level);
  WarpOptions opts;
  opts.border = border;
  opts.with_derivative = with_gradient;
  WarpResult warp = warp_image(src_feat, z_level, k_ref, k_src, relative_transform(ref_cam, src_cam), opts);

  const int h = ref_feat.height(), w = ref_feat.width(), c = ref_feat.channels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y < border || y > h - 1 - border || x < border || x > w - 1 - border) warp.mask(y, x) = 0;
    }
  }
  if (sig) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        sig->push_back(warp.mask(y, x) > 0 ? warp.cells[static_cast<std::size_t>(y) * w + x] : -1);
      }
    }
  }

  MaskedLoss out;
  if (with_gradient) out.gradient = DepthMap(depth.height(), depth.width(), 1);
  double total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(warp.mask(y, x) > 0)) continue;
      ++out.count;
      for (int k = 0; k < c; ++k) total += std::abs(ref_feat(y, x, k) - warp.image(y, x, k));
    }
  }
  if (out.count == 0) return out;
  out.value = total / static_cast<double>(out.count);
  if (!with_gradient && !sig) return out;

  const double inv_m = 1.0 / static_cast<double>(out.count);
  const int f = 1 << level;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(warp.mask(y, x) > 0)) continue;
      double dz = 0;
      for (int k = 0; k < c; ++k) {
        const double s = sgn(ref_feat(y, x, k) - warp.image(y, x, k));
        if (sig) sig->push_back(static_cast<std::int64_t>(s));
        if (with_gradient) dz += -s * inv_m * warp.d_ddepth(y, x, k);
      }
      if (!with_gradient) continue;
      // Area-averaged depth: spread evenly over the valid pixels of the block.
      int n = 0;
      for (int by = 0; by < f; ++by) {
        for (int bx = 0; bx < f; ++bx) n += depth(y * f + by, x * f + bx) > 0 ? 1 : 0;
      }
      for (int by = 0; by < f; ++by) {
        for (int bx = 0; bx < f; ++bx) {
          if (depth(y * f + by, x * f + bx) > 0) out.gradient(y * f + by, x * f + bx) += dz / n;
        }
      }
    }
  }
  return out;
}

struct Evaluation {
  LossBreakdown loss;
  DepthMap gradient;
  Signature signature;
};

Evaluation evaluate(const View& ref, std::span<const View> sources, const DepthMap& depth,
                    const LossWeights& weights, const DepthRange& range, bool with_gradient, bool with_signature) {
  weights.validate();
  if (sources.empty()) throw std::invalid_argument("total_loss: need at least one source view");
  if (depth.channels() != 1 || !depth.same_extent(ref.image)) {
    throw std::invalid_argument("total_loss: depth must be single-channel at reference image resolution");
  }
  for (const auto& s : sources) {
    if (s.image.channels() != ref.image.channels()) {
      throw std::invalid_argument("total_loss: source and reference channel counts differ");
    }
  }
  Evaluation ev;
  Signature* sig = with_signature ? &ev.signature : nullptr;
  const int h = depth.height(), w = depth.width();
  if (with_gradient) ev.gradient = DepthMap(h, w, 1);
  ev.loss.n = static_cast<std::int64_t>(h) * w;

  const ImageGrid luma = to_luma(ref.image);
  const MaskedLoss smooth = smoothness_impl(depth, luma, weights.alpha2, weights.alpha3, range, with_gradient, sig);
  const auto beta = weights.beta();
  const int border = ref.pyramid.border();

  for (const View& src : sources) {
    const RigidTransform rel = relative_transform(ref.camera, src.camera);
    WarpOptions opts;
    opts.with_derivative = with_gradient;
    const WarpResult warp = warp_image(src.image, depth, ref.camera.intrinsics, src.camera.intrinsics, rel, opts);
    if (sig) {
      sig->insert(sig->end(), warp.cells.begin(), warp.cells.end());
    }
    const MaskedLoss photo = photometric_impl(ref.image, warp.image, warp.mask, with_gradient, sig);
    const MaskedLoss ssim = ssim_impl(ref.image, warp.image, warp.mask, with_gradient);

    ViewLoss vl;
    vl.photo = photo.value;
    vl.ssim = ssim.value;
    vl.smooth = smooth.value;
    vl.m = photo.count;
    vl.pixel = weights.lambda1 * vl.photo + weights.lambda2 * vl.ssim + weights.lambda3 * vl.smooth;

    if (with_gradient) {
      const double gp = weights.gamma1 * weights.lambda1;
      const double gs = weights.gamma1 * weights.lambda2;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!(warp.mask(y, x) > 0)) continue;
          double g = 0;
          for (int k = 0; k < ref.image.channels(); ++k) {
            g += (gp * photo.gradient(y, x, k) + gs * ssim.gradient(y, x, k)) * warp.d_ddepth(y, x, k);
          }
          ev.gradient(y, x) += g;
        }
      }
      ev.gradient.array() += weights.gamma1 * weights.lambda3 * smooth.gradient.array();
    }

    for (int level = 1; level <= 3; ++level) {
      const auto& rf = ref.pyramid.at_level(level).features;
      const auto& sf = src.pyramid.at_level(level).features;
      const MaskedLoss fl =
          feature_scale_impl(rf, sf, depth, ref.camera, src.camera, level, border, with_gradient, sig);
      vl.feature_per_scale[level - 1] = fl.value;
      vl.feature_m[level - 1] = fl.count;
      vl.feature += beta[level - 1] * fl.value;
      if (with_gradient) ev.gradient.array() += weights.gamma2 * beta[level - 1] * fl.gradient.array();
    }
    vl.total = weights.gamma1 * vl.pixel + weights.gamma2 * vl.feature;

    auto& b = ev.loss;
    b.photo += vl.photo;
    b.ssim += vl.ssim;
    b.smooth += vl.smooth;
    b.pixel += vl.pixel;
    for (int i = 0; i < 3; ++i) b.feature_per_scale[i] += vl.feature_per_scale[i];
    b.feature += vl.feature;
    b.total += vl.total;
    b.m += vl.m;
    b.views.push_back(vl);
  }
  return ev;
}

}  // namespace

MaskedLoss photometric_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask,
                            bool with_gradient) {
  return photometric_impl(ref, warped, mask, with_gradient, nullptr);
}

MaskedLoss ssim_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask, bool with_gradient) {
  return ssim_impl(ref, warped, mask, with_gradient);
}

ImageGrid ssim_map(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask) {
  require_same(ref, warped, mask, "ssim_map");
  ImageGrid out(ref.height(), ref.width(), 1);
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      if (!(mask(y, x) > 0)) continue;
      double s = 0;
      for (int k = 0; k < ref.channels(); ++k) s += ssim_terms(ref, warped, mask, y, x, k).s;
      out(y, x) = s / ref.channels();
    }
  }
  return out;
}

MaskedLoss smoothness_loss(const DepthMap& depth, const ImageGrid& luma, double alpha2, double alpha3,
                           const DepthRange& range, bool with_gradient) {
  return smoothness_impl(depth, luma, alpha2, alpha3, range, with_gradient, nullptr);
}

PixelLoss pixel_loss(const ImageGrid& ref, const ImageGrid& warped, const BinaryMask& mask, const DepthMap& depth,
                     const LossWeights& weights, const DepthRange& range) {
  PixelLoss out;
  const MaskedLoss photo = photometric_loss(ref, warped, mask);
  out.photo = photo.value;
  out.m = photo.count;
  out.ssim = ssim_loss(ref, warped, mask).value;
  out.smooth = smoothness_loss(depth, to_luma(ref), weights.alpha2, weights.alpha3, range).value;
  out.value = weights.lambda1 * out.photo + weights.lambda2 * out.ssim + weights.lambda3 * out.smooth;
  return out;
}

MaskedLoss feature_loss_scale(const ImageGrid& ref_feat, const ImageGrid& src_feat, const DepthMap& depth,
                              const CameraModel& ref_cam, const CameraModel& src_cam, int level, int border,
                              bool with_gradient) {
  return feature_scale_impl(ref_feat, src_feat, depth, ref_cam, src_cam, level, border, with_gradient, nullptr);
}

FeatureLoss feature_loss(const FeaturePyramid& ref, const FeaturePyramid& src, const DepthMap& depth,
                         const CameraModel& ref_cam, const CameraModel& src_cam, const LossWeights& weights) {
  FeatureLoss out;
  const auto beta = weights.beta();
  for (int level = 1; level <= 3; ++level) {
    const MaskedLoss l = feature_loss_scale(ref.at_level(level).features, src.at_level(level).features, depth,
                                            ref_cam, src_cam, level, ref.border());
    out.per_scale[level - 1] = l.value;
    out.m[level - 1] = l.count;
    out.value += beta[level - 1] * l.value;
  }
  return out;
}

View make_view(ImageGrid image, const CameraModel& camera, const FeatureConfig& cfg) {
  View v;
  v.pyramid = extract_pyramid(image, cfg);
  v.image = std::move(image);
  v.camera = camera;
  return v;
}

LossBreakdown total_loss(const View& ref, std::span<const View> sources, const DepthMap& depth,
                         const LossWeights& weights, const DepthRange& range) {
  return evaluate(ref, sources, depth, weights, range, false, false).loss;
}

LossAndGradient total_loss_and_gradient(const View& ref, std::span<const View> sources, const DepthMap& depth,
                                        const LossWeights& weights, const DepthRange& range) {
  Evaluation ev = evaluate(ref, sources, depth, weights, range, true, false);
  return {std::move(ev.loss), std::move(ev.gradient)};
}

std::vector<std::int64_t> loss_signature(const View& ref, std::span<const View> sources, const DepthMap& depth,
                                         const LossWeights& weights, const DepthRange& range) {
  return evaluate(ref, sources, depth, weights, range, false, true).signature;
}

}  // namespace mvs
