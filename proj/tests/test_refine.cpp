#include "mvs/pipeline.hpp"
#include "mvs/refine.hpp"
#include "mvs/scene.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace mvs;

namespace {

const DepthRange kRange{425, 935};

std::vector<PixelIndex> all_pixels(const DepthMap& d) {
  std::vector<PixelIndex> s;
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) s.push_back({y, x});
  }
  return s;
}

RefineConfig refine_config() {
  RefineConfig cfg;
  cfg.clamp = kRange;
  return cfg;
}

struct Oracle {
  std::vector<View> views;
  DepthMap gt;
};

Oracle plane_oracle(std::uint64_t texture_seed) {
  SceneSpec spec;
  spec.texture = NoiseTexture{texture_seed, 3, 30};
  const CameraIntrinsics k(80, 80, 31.5, 23.5, 64, 48);
  spec.views = {{k, {}}, {k, RigidTransform::translate(Point3(-120, 0, 0))}};
  const auto r = render_scene(spec);
  Oracle o;
  for (std::size_t i = 0; i < r.size(); ++i) o.views.push_back(make_view(r[i].image, spec.views[i]));
  o.gt = r[0].depth;
  return o;
}

double rms(const DepthMap& a, const DepthMap& b, const BinaryMask& region) {
  double s = 0;
  int n = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(region.array()[i] > 0)) continue;
    s += (a.array()[i] - b.array()[i]) * (a.array()[i] - b.array()[i]);
    ++n;
  }
  return std::sqrt(s / n);
}

}  // namespace

TEST_CASE("relative error") {
  CHECK(relative_error(1, 1) == 0);
  CHECK(relative_error(2, 1) == 0.5);
  CHECK(relative_error(0, 0) == 0);
  CHECK(relative_error(1e-13, 0) == doctest::Approx(0.1));
}

TEST_CASE("finite differences on a quadratic toy loss") {
  Lcg rng(1);
  DepthMap z(4, 5, 1), c(4, 5, 1), analytic(4, 5, 1);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z.array()[i] = rng.uniform(500, 700);
    c.array()[i] = rng.uniform(500, 700);
  }
  analytic.array() = 2 * (z.array() - c.array());
  const ScalarLoss loss = [&](const DepthMap& d) { return (d.array() - c.array()).square().sum(); };
  const auto samples = all_pixels(z);
  const auto rep = finite_difference_gradient(loss, analytic, z, 1e-3, samples);
  CHECK(rep.admissible == 20);
  for (const auto& s : rep.samples) {
    CHECK(std::abs(s.numeric - s.analytic) < 1e-6 * std::max(1.0, std::abs(s.analytic)));
    CHECK(s.analytic == 2 * (z(s.pixel.y, s.pixel.x) - c(s.pixel.y, s.pixel.x)));
  }
}

TEST_CASE("central differences converge at second order") {
  DepthMap z(1, 1, 1, 2.0), analytic(1, 1, 1, 3 * 4.0 + 1);
  const ScalarLoss cubic = [](const DepthMap& d) { return std::pow(d(0, 0), 3) + d(0, 0); };
  const std::vector<PixelIndex> one{{0, 0}};
  double prev = 0;
  for (double h : {1e-1, 5e-2, 2.5e-2}) {
    const auto rep = finite_difference_gradient(cubic, analytic, z, h, one);
    const double err = std::abs(rep.samples[0].numeric - 13.0);
    CHECK(err == doctest::Approx(h * h).epsilon(1e-6));
    if (prev > 0) CHECK(err == doctest::Approx(prev / 4).epsilon(1e-6));
    prev = err;
  }
}

TEST_CASE("random 8x8 instances match finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = random_instance(seed);
    const auto rep = finite_difference_gradient(inst.depth, inst.views[0], std::span(inst.views).subspan(1), {},
                                                kRange, 1e-3, all_pixels(inst.depth));
    CHECK(rep.admissible > 32);
    CHECK(rep.max_relative_error < 1e-3);
    CHECK(rep.mean_relative_error < 1e-4);
  }
}

TEST_CASE("large steps across pixel cells are flagged as excluded") {
  const auto inst = random_instance(3);
  const auto rep = finite_difference_gradient(inst.depth, inst.views[0], std::span(inst.views).subspan(1), {},
                                              kRange, 40.0, all_pixels(inst.depth));
  int excluded = 0;
  for (const auto& s : rep.samples) excluded += s.excluded ? 1 : 0;
  CHECK(excluded > 0);
  CHECK(rep.admissible + excluded == 64);
}

TEST_CASE("constant images: photometric gradient vanishes") {
  const CameraIntrinsics k(16, 16, 3.5, 3.5, 8, 8);
  const View ref = make_view(ImageGrid(8, 8, 3, 0.4), {k, {}});
  const View src = make_view(ImageGrid(8, 8, 3, 0.4), {k, RigidTransform::translate(Point3(20, 0, 0))});
  Lcg rng(4);
  DepthMap d(8, 8, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.array()[i] = rng.uniform(550, 650);
  const LossWeights w;
  const auto g = loss_gradient(d, ref, std::span(&src, 1), w, kRange);
  const auto smooth = smoothness_loss(d, to_luma(ref.image), w.alpha2, w.alpha3, kRange, true);
  CHECK((g.array() - w.gamma1 * w.lambda3 * smooth.gradient.array()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("refinement from ground truth stops immediately") {
  const auto o = plane_oracle(7);
  const auto res = refine_depth_gd(o.gt, o.views[0], std::span(o.views).subspan(1), {}, refine_config());
  CHECK(res.trace.size() == 1);
  CHECK((res.depth.array() == o.gt.array()).all());
}

TEST_CASE("refinement from +3 mm halves the RMS error on several textures") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto o = plane_oracle(seed);
    const auto region = interior_mask(o.gt, o.views[0].camera, std::span(&o.views[1].camera, 1), 4);
    DepthMap init = o.gt;
    init.array() += 3;
    const auto cfg = refine_config();
    const auto res = refine_depth_gd(init, o.views[0], std::span(o.views).subspan(1), {}, cfg);
    CHECK(res.iterations <= 200);
    const double before = rms(init, o.gt, region), after = rms(res.depth, o.gt, region);
    INFO("seed " << seed << ": " << before << " -> " << after);
    CHECK(after <= 0.5 * before);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
  }
}

TEST_CASE("gradient mode descends on a quadratic") {
  DepthMap c(3, 3, 1, 600), init(3, 3, 1, 650);
  const LossWithGradient loss = [&](const DepthMap& z, DepthMap* g) {
    if (g) g->array() = 2 * (z.array() - c.array());
    return (z.array() - c.array()).square().sum();
  };
  auto cfg = refine_config();
  cfg.method = RefineMethod::gradient;
  cfg.step = 0.25;
  const auto res = refine_depth_gd(init, loss, cfg);
  CHECK((res.depth.array() - 600).abs().maxCoeff() < 1e-2);
  cfg.method = RefineMethod::adaptive;
  const auto ad = refine_depth_gd(init, loss, cfg);
  CHECK((ad.depth.array() - 600).abs().maxCoeff() < 1e-2);
}

TEST_CASE("line search floor stops early with the input unchanged") {
  DepthMap init(2, 2, 1, 600);
  int calls = 0;
  // Any move increases the loss.
  const LossWithGradient loss = [&](const DepthMap& z, DepthMap* g) {
    ++calls;
    if (g) g->array() = -1;
    return (z.array() - 600).abs().sum();
  };
  auto cfg = refine_config();
  cfg.max_halvings = 3;
  const auto res = refine_depth_gd(init, loss, cfg);
  CHECK(res.iterations == 0);
  CHECK(res.trace.size() == 1);
  CHECK_FALSE(res.converged);
  CHECK((res.depth.array() == 600).all());
  CHECK(calls == 1 + 4);
}

TEST_CASE("refinement respects the clamp and invalid pixels") {
  DepthMap init(2, 2, 1, 600);
  init(1, 1) = 0;
  const LossWithGradient loss = [&](const DepthMap& z, DepthMap* g) {
    if (g) g->array() = -1;  // pushes depth up forever
    return -z.array().sum();
  };
  auto cfg = refine_config();
  cfg.clamp = {425, 620};
  const auto res = refine_depth_gd(init, loss, cfg);
  CHECK(res.depth(0, 0) == 620);
  CHECK(res.depth(1, 1) == 0);
}

TEST_CASE("refine config validation") {
  auto cfg = refine_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.pixel_step = 60;
  CHECK_THROWS(cfg.validate());
  cfg = refine_config();
  cfg.max_iterations = 0;
  CHECK_THROWS(cfg.validate());
  cfg = refine_config();
  cfg.step = 0;
  CHECK_THROWS(cfg.validate());
}
