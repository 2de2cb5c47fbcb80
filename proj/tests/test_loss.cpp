#include "mvs/loss.hpp"
#include "mvs/scene.hpp"
#include "mvs/warp.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace mvs;

namespace {

const DepthRange kRange{425, 935};

// Two-view noiseless plane oracle with integer disparity at every level.
struct PlaneOracle {
  std::vector<View> views;
  DepthMap gt;
};

PlaneOracle plane_oracle(int sources = 1) {
  SceneSpec spec;
  spec.texture = NoiseTexture{7, 3, 30};
  const CameraIntrinsics k(80, 80, 31.5, 23.5, 64, 48);
  spec.views.push_back({k, {}});
  for (int i = 0; i < sources; ++i) spec.views.push_back({k, RigidTransform::translate(Point3(-120, 0, 0))});
  const auto rendered = render_scene(spec);
  PlaneOracle o;
  for (std::size_t i = 0; i < rendered.size(); ++i) o.views.push_back(make_view(rendered[i].image, spec.views[i]));
  o.gt = rendered[0].depth;
  return o;
}

template <typename F>
ImageGrid numeric_gradient(const ImageGrid& at, F f, double h) {
  ImageGrid g(at.height(), at.width(), at.channels());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    ImageGrid up = at, dn = at;
    up.array()[i] += h;
    dn.array()[i] -= h;
    g.array()[i] = (f(up) - f(dn)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("photometric loss examples") {
  Lcg rng(1);
  const ImageGrid a = testutil::random_image(rng, 6, 7, 3);
  const BinaryMask full(6, 7, 1, 1);
  const auto same = photometric_loss(a, a, full);
  CHECK(same.value < 1e-15);
  CHECK(same.count == 42);

  const auto c = photometric_loss(ImageGrid(5, 5, 1, 0), ImageGrid(5, 5, 1, 0.3), BinaryMask(5, 5, 1, 1));
  CHECK(c.value == doctest::Approx(0.3).epsilon(1e-15));

  const auto empty = photometric_loss(a, testutil::random_image(rng, 6, 7, 3), BinaryMask(6, 7, 1, 0));
  CHECK(empty.value == 0);
  CHECK(empty.count == 0);
  CHECK_THROWS(photometric_loss(a, ImageGrid(6, 7, 1), full));
}

TEST_CASE("photometric gradient matches finite differences") {
  Lcg rng(2);
  const ImageGrid a = testutil::random_image(rng, 5, 6, 2), b = testutil::random_image(rng, 5, 6, 2);
  BinaryMask mask(5, 6, 1, 1);
  mask(2, 3) = 0;
  const auto an = photometric_loss(a, b, mask, true);
  const auto fd = numeric_gradient(b, [&](const ImageGrid& w) { return photometric_loss(a, w, mask).value; }, 1e-7);
  CHECK(testutil::max_abs_diff(an.gradient, fd) < 1e-7);
}

TEST_CASE("SSIM examples") {
  Lcg rng(3);
  const ImageGrid a = testutil::random_image(rng, 8, 8, 3);
  const BinaryMask full(8, 8, 1, 1);
  CHECK(ssim_loss(a, a, full).value == 0);
  CHECK((ssim_map(a, a, full).array() == 1).all());

  const auto c = ssim_loss(ImageGrid(6, 6, 1, 0.25), ImageGrid(6, 6, 1, 0.75), BinaryMask(6, 6, 1, 1));
  const double s = (2 * 0.25 * 0.75 + kSsimC1) / (0.25 * 0.25 + 0.75 * 0.75 + kSsimC1);
  CHECK(c.value == doctest::Approx((1 - s) / 2).epsilon(1e-13));
  CHECK(std::abs(c.value - 0.19993) < 1e-4);
  CHECK(kSsimC1 == 1e-4);
  CHECK(kSsimC2 == doctest::Approx(9e-4).epsilon(1e-15));

  for (int i = 0; i < 20; ++i) {
    const auto l = ssim_loss(testutil::random_image(rng, 7, 9, 1), testutil::random_image(rng, 7, 9, 1),
                             BinaryMask(7, 9, 1, 1));
    CHECK(l.value >= 0);
    CHECK(l.value <= 1);
  }
}

TEST_CASE("SSIM gradient matches finite differences") {
  Lcg rng(4);
  const ImageGrid a = testutil::random_image(rng, 6, 5, 2), b = testutil::random_image(rng, 6, 5, 2);
  BinaryMask mask(6, 5, 1, 1);
  mask(0, 0) = 0;
  mask(3, 2) = 0;
  const auto an = ssim_loss(a, b, mask, true);
  const auto fd = numeric_gradient(b, [&](const ImageGrid& w) { return ssim_loss(a, w, mask).value; }, 1e-6);
  CHECK(testutil::max_abs_diff(an.gradient, fd) < 1e-8);
}

TEST_CASE("smoothness examples") {
  const ImageGrid luma(6, 6, 1, 0.5);
  CHECK(smoothness_loss(DepthMap(6, 6, 1, 600), luma, 0.5, 0.5, kRange).value == 0);

  DepthMap ramp(6, 6, 1);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) ramp(y, x) = 500 + 10 * x;
  }
  CHECK(smoothness_loss(ramp, luma, 0.5, 0.5, kRange).value > 0);
  // Only first-order terms along x: 5 per row, each 10 / span.
  CHECK(smoothness_loss(ramp, luma, 0.5, 0.5, kRange).value ==
        doctest::Approx(6 * 5 * (10 / kRange.span()) / 36).epsilon(1e-12));

  // Unit (normalized) step across a unit intensity edge.
  ImageGrid edge(1, 2, 1);
  edge(0, 0) = 0;
  edge(0, 1) = 1;
  DepthMap step(1, 2, 1);
  step(0, 0) = 500;
  step(0, 1) = 500 + kRange.span();
  CHECK(smoothness_loss(step, edge, 0.5, 0.5, kRange).value == doctest::Approx(std::exp(-0.5) / 2).epsilon(1e-14));
}

TEST_CASE("smoothness gradient matches finite differences") {
  Lcg rng(5);
  const ImageGrid luma = testutil::random_image(rng, 5, 6);
  DepthMap d(5, 6, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.array()[i] = rng.uniform(550, 650);
  d(2, 2) = 0;
  const auto an = smoothness_loss(d, luma, 0.5, 0.5, kRange, true);
  const auto fd = numeric_gradient(d, [&](const DepthMap& z) { return smoothness_loss(z, luma, 0.5, 0.5, kRange).value; }, 1e-5);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (i == d.index(2, 2)) continue;
    CHECK(an.gradient.array()[i] == doctest::Approx(fd.array()[i]).epsilon(1e-6));
  }
}

TEST_CASE("pixel loss combination") {
  const LossWeights w;
  CHECK(w.lambda1 * 0.1 + w.lambda2 * 0.2 + w.lambda3 * 0.3 == doctest::Approx(0.1401).epsilon(1e-14));
  Lcg rng(6);
  const ImageGrid a = testutil::random_image(rng, 8, 8), b = testutil::random_image(rng, 8, 8);
  const BinaryMask full(8, 8, 1, 1);
  DepthMap d(8, 8, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.array()[i] = rng.uniform(550, 650);
  const auto p = pixel_loss(a, b, full, d, w, kRange);
  CHECK(std::abs(p.value - (0.8 * p.photo + 0.2 * p.ssim + 0.067 * p.smooth)) < 1e-15);
  LossWeights only_photo = w;
  only_photo.lambda2 = only_photo.lambda3 = 0;
  CHECK(pixel_loss(a, b, full, d, only_photo, kRange).value == 0.8 * photometric_loss(a, b, full).value);
  CHECK(pixel_loss(a, a, full, DepthMap(8, 8, 1, 600), w, kRange).value == 0);
}

TEST_CASE("feature loss") {
  const auto o = plane_oracle();
  const auto& ref = o.views[0];
  const auto& src = o.views[1];
  const LossWeights w;
  const auto f = feature_loss(ref.pyramid, src.pyramid, o.gt, ref.camera, src.camera, w);
  for (int i = 0; i < 3; ++i) CHECK(f.per_scale[i] / 8 < 1e-3);
  CHECK(f.m[0] > 0);
  CHECK(f.m[1] > 0);
  // At 8x6 every pixel lies within the descriptor border.
  CHECK(f.m[2] == 0);
  CHECK(f.value == doctest::Approx(0.2 * f.per_scale[0] + 0.8 * f.per_scale[1] + 0.4 * f.per_scale[2]));

  // Identity transform with identical features.
  const auto same = feature_loss(ref.pyramid, ref.pyramid, o.gt, ref.camera, ref.camera, w);
  CHECK(same.value < 1e-15);

  // Fully occluded view.
  const CameraModel far{src.camera.intrinsics, RigidTransform::translate(Point3(-1e5, 0, 0))};
  const auto occ = feature_loss(ref.pyramid, src.pyramid, o.gt, ref.camera, far, w);
  CHECK(occ.value == 0);
  for (auto m : occ.m) CHECK(m == 0);

  LossWeights zero = w;
  zero.beta1 = zero.beta2 = zero.beta3 = 0;
  CHECK(feature_loss(ref.pyramid, src.pyramid, DepthMap(48, 64, 1, 500), ref.camera, src.camera, zero).value == 0);
  // beta applied to unit per-scale losses.
  CHECK(w.beta1 + w.beta2 + w.beta3 == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("feature loss gradient matches finite differences") {
  // Smooth sub-pixel instance large enough for every pyramid level to have
  // valid pixels.
  Lcg rng(7);
  const int n = 32;
  const CameraIntrinsics k(2.0 * n, 2.0 * n, (n - 1) / 2.0, (n - 1) / 2.0, n, n);
  const View ref = make_view(testutil::random_image(rng, n, n), {k, {}});
  const View src = make_view(testutil::random_image(rng, n, n), {k, RigidTransform::translate(Point3(25, 10, 5))});
  DepthMap d(n, n, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.array()[i] = rng.uniform(590, 610);
  for (int level = 1; level <= 3; ++level) {
    const auto& rf = ref.pyramid.at_level(level).features;
    const auto& sf = src.pyramid.at_level(level).features;
    const auto an = feature_loss_scale(rf, sf, d, ref.camera, src.camera, level, 1, true);
    REQUIRE(an.count > 0);
    int agree = 0, total = 0;
    for (int y = 0; y < n; y += 3) {
      for (int x = 0; x < n; x += 3) {
        const double h = 1e-5;
        DepthMap up = d, dn = d;
        up(y, x) += h;
        dn(y, x) -= h;
        const double fd = (feature_loss_scale(rf, sf, up, ref.camera, src.camera, level, 1).value -
                           feature_loss_scale(rf, sf, dn, ref.camera, src.camera, level, 1).value) / (2 * h);
        // A kink or cell crossing inside [z - h, z + h] is the only
        // admissible disagreement, and those are rare.
        agree += std::abs(fd - an.gradient(y, x)) <= 1e-6 * std::max(1.0, std::abs(fd)) ? 1 : 0;
        ++total;
      }
    }
    CHECK(agree >= 0.95 * total);
  }
}

TEST_CASE("total loss breakdown") {
  const auto o = plane_oracle(2);
  const LossWeights w;
  const std::span<const View> one(o.views.data() + 1, 1);
  const std::span<const View> two(o.views.data() + 1, 2);

  const auto at_gt = total_loss(o.views[0], one, o.gt, w, kRange);
  CHECK(at_gt.total < 1e-3);

  DepthMap off = o.gt;
  off.array() += 7;
  const auto a = total_loss(o.views[0], one, off, w, kRange);
  const auto b = total_loss(o.views[0], two, off, w, kRange);
  CHECK(b.total == doctest::Approx(2 * a.total).epsilon(1e-14));
  CHECK(b.views.size() == 2);
  CHECK(b.n == 48 * 64);
  CHECK(std::abs(a.pixel - (w.lambda1 * a.photo + w.lambda2 * a.ssim + w.lambda3 * a.smooth)) < 1e-10);
  CHECK(std::abs(a.feature - (w.beta1 * a.feature_per_scale[0] + w.beta2 * a.feature_per_scale[1] +
                              w.beta3 * a.feature_per_scale[2])) < 1e-10);
  CHECK(std::abs(a.total - (w.gamma1 * a.pixel + w.gamma2 * a.feature)) < 1e-10);

  LossWeights none = w;
  none.gamma1 = none.gamma2 = 0;
  CHECK(total_loss(o.views[0], one, off, none, kRange).total == 0);
  CHECK_THROWS(total_loss(o.views[0], {}, off, w, kRange));
}

TEST_CASE("loss weight validation and defaults") {
  const LossWeights w;
  CHECK(w.gamma1 == 1);
  CHECK(w.gamma2 == 1);
  CHECK(w.lambda1 == 0.8);
  CHECK(w.lambda2 == 0.2);
  CHECK(w.lambda3 == 0.067);
  CHECK(w.beta1 == 0.2);
  CHECK(w.beta2 == 0.8);
  CHECK(w.beta3 == 0.4);
  CHECK(w.alpha2 == 0.5);
  CHECK(w.alpha3 == 0.5);
  LossWeights bad;
  bad.lambda1 = -1;
  CHECK_THROWS(bad.validate());
}
