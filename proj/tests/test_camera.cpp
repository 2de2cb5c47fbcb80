#include "mvs/camera.hpp"
#include "mvs/warp.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace mvs;

namespace {
const CameraIntrinsics kVga(800, 800, 320, 240, 640, 480);
}

TEST_CASE("backproject examples") {
  const CameraIntrinsics k(500, 400, 31.5, 23.5, 64, 48);
  CHECK(backproject<double>({k.cx, k.cy}, 100.0, k) == Point3(0, 0, 100));
  CHECK(backproject<double>({k.cx + k.fx, k.cy}, 500.0, k).isApprox(Point3(500, 0, 500), 1e-15));
  const Point3 p = backproject<double>({400, 300}, 425.0, kVga);
  CHECK(p.x() == doctest::Approx(42.5).epsilon(1e-15));
  CHECK(p.y() == doctest::Approx(31.875).epsilon(1e-15));
  CHECK(p.z() == 425.0);
  CHECK_THROWS_AS(backproject<double>({1, 1}, 0.0, k), std::domain_error);
  CHECK_THROWS_AS(backproject<double>({1, 1}, -3.0, k), std::domain_error);
}

TEST_CASE("project examples and round trip") {
  const auto c = project<double>(Point3(0, 0, 100), kVga);
  CHECK(c.pixel == PixelCoord(320, 240));
  CHECK(c.depth == 100);
  const auto q = project<double>(Point3(42.5, 31.875, 425), kVga);
  CHECK(q.pixel.x() == doctest::Approx(400).epsilon(1e-14));
  CHECK(q.pixel.y() == doctest::Approx(300).epsilon(1e-14));
  CHECK(q.depth == 425);
  CHECK_THROWS_AS(project<double>(Point3(1, 1, 0), kVga), std::domain_error);
  CHECK_FALSE(try_project<double>(Point3(1, 1, -5), kVga).has_value());

  Lcg rng(4);
  for (int i = 0; i < 100; ++i) {
    const PixelCoord p(rng.uniform(0, 639), rng.uniform(0, 479));
    const double z = rng.uniform(425, 935);
    const auto r = project<double>(backproject<double>(p, z, kVga), kVga);
    CHECK((r.pixel - p).norm() < 1e-10);
    CHECK(std::abs(r.depth - z) < 1e-12);
  }
}

TEST_CASE("intrinsics validation and downscaling") {
  CHECK_THROWS(CameraIntrinsics(0, 1, 1, 1, 4, 4).validate());
  CHECK_THROWS(CameraIntrinsics(1, 1, 5, 1, 4, 4).validate());
  CHECK_NOTHROW(kVga.validate());
  const auto h = kVga.half();
  CHECK(h.fx == 400);
  CHECK(h.cx == 159.75);
  CHECK(h.width == 320);
  CHECK(h.height == 240);
  // A scene point projects to consistent positions at both scales.
  const Point3 p(13, -7, 500);
  const auto full = project<double>(p, kVga), half = project<double>(p, h);
  CHECK(half.pixel.x() == doctest::Approx((full.pixel.x() - 0.5) / 2));
  CHECK(half.pixel.y() == doctest::Approx((full.pixel.y() - 0.5) / 2));
}

TEST_CASE("rigid transform algebra") {
  const Mat3<double> r = Eigen::AngleAxisd(0.3, Point3(1, 2, 3).normalized()).toRotationMatrix();
  const RigidTransform t(r, Point3(4, -5, 6));
  CHECK_NOTHROW(t.validate());
  const RigidTransform id = t * t.inverse();
  CHECK(id.rotation.isApprox(Mat3<double>::Identity(), 1e-14));
  CHECK(id.translation.norm() < 1e-13);
  Mat3<double> bad = Mat3<double>::Identity();
  bad(0, 0) = 2;
  CHECK_THROWS(RigidTransform(bad, Point3::Zero()).validate());
  CHECK_THROWS(RigidTransform(-Mat3<double>::Identity(), Point3::Zero()).validate());
}

TEST_CASE("transfer_pixel: identity, translation, rotation") {
  const CameraIntrinsics k(80, 70, 31.5, 23.5, 64, 48);
  Lcg rng(9);
  for (int i = 0; i < 50; ++i) {
    const PixelCoord p(rng.uniform(0, 63), rng.uniform(0, 47));
    const double z = rng.uniform(425, 935);

    const auto same = transfer_pixel<double>(p, z, k, k, RigidTransform::identity());
    REQUIRE(same.valid);
    CHECK((same.pixel - p).norm() < 1e-12);
    CHECK(same.depth == doctest::Approx(z).epsilon(1e-15));

    const double tx = rng.uniform(-100, 100);
    const auto tr = transfer_pixel<double>(p, z, k, k, RigidTransform::translate(Point3(tx, 0, 0)));
    CHECK(tr.pixel.x() == doctest::Approx(p.x() + k.fx * tx / z).epsilon(1e-13));
    CHECK(tr.pixel.y() == doctest::Approx(p.y()).epsilon(1e-13));
    CHECK(tr.dpixel_ddepth.x() == doctest::Approx(-k.fx * tx / (z * z)).epsilon(1e-12));

    Mat3<double> rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const auto rot = transfer_pixel<double>(p, z, k, k, RigidTransform(rz, Point3::Zero()));
    CHECK(rot.pixel.x() == doctest::Approx(k.cx - (p.y() - k.cy) * k.fx / k.fy).epsilon(1e-13));
    CHECK(rot.pixel.y() == doctest::Approx(k.cy + (p.x() - k.cx) * k.fy / k.fx).epsilon(1e-13));
  }
  // Behind the source camera.
  CHECK_FALSE(transfer_pixel<double>({10, 10}, 500.0, k, k, RigidTransform::translate(Point3(0, 0, -600))).valid);
  CHECK_FALSE(transfer_pixel<double>({10, 10}, 0.0, k, k, RigidTransform::identity()).valid);
}

TEST_CASE("transfer derivative matches finite differences") {
  const CameraIntrinsics k(80, 70, 31.5, 23.5, 64, 48);
  const Mat3<double> r = Eigen::AngleAxisd(0.1, Point3(0.2, 1, 0.1).normalized()).toRotationMatrix();
  const RigidTransform t(r, Point3(30, -10, 15));
  const PixelCoord p(12.3, 30.1);
  const double z = 612, h = 1e-4;
  const auto a = transfer_pixel<double>(p, z, k, k, t);
  const auto up = transfer_pixel<double>(p, z + h, k, k, t), dn = transfer_pixel<double>(p, z - h, k, k, t);
  const PixelCoord fd = (up.pixel - dn.pixel) / (2 * h);
  CHECK((fd - a.dpixel_ddepth).norm() < 1e-8);
}

TEST_CASE("bilinear_sample examples") {
  ImageGrid img(2, 2, 1);
  img(0, 0) = 0;
  img(0, 1) = 1;
  img(1, 0) = 2;
  img(1, 1) = 3;
  const auto mid = bilinear_sample(img, {0.5, 0.5});
  REQUIRE(mid.valid);
  CHECK(mid.value[0] == 1.5);
  CHECK(mid.d_dx[0] == 1.0);
  CHECK(mid.d_dy[0] == 2.0);
  CHECK(mid.cell == 0);

  const auto out = bilinear_sample(img, {-0.1, 0});
  CHECK_FALSE(out.valid);
  CHECK(out.value[0] == 0);
  CHECK(out.cell == -1);
  CHECK_FALSE(bilinear_sample(img, {1.0000001, 0}).valid);

  Lcg rng(2);
  const ImageGrid r = testutil::random_image(rng, 5, 7, 3);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      const auto s = bilinear_sample(r, {double(x), double(y)});
      REQUIRE(s.valid);
      for (int c = 0; c < 3; ++c) CHECK(s.value[c] == r(y, x, c));
    }
  }
  // Last row and column use the preceding cell.
  CHECK(bilinear_sample(r, {6.0, 4.0}).cell == 3 * 7 + 5);
  // Border shrinks the domain.
  CHECK_FALSE(bilinear_sample(r, {0.5, 2}, 1).valid);
  CHECK(bilinear_sample(r, {1.0, 2}, 1).valid);
}

TEST_CASE("warp_image: identity transform reproduces the source") {
  Lcg rng(3);
  const CameraIntrinsics k(50, 50, 15.5, 11.5, 32, 24);
  const ImageGrid src = testutil::random_image(rng, 24, 32, 3);
  DepthMap depth(24, 32, 1);
  for (Eigen::Index i = 0; i < depth.size(); ++i) depth.array()[i] = rng.uniform(425, 935);
  const auto w = warp_image(src, depth, k, k, RigidTransform::identity());
  CHECK(testutil::max_abs_diff(w.image, src) <= 1e-12);
  CHECK(w.mask.array().minCoeff() == 1);
}

TEST_CASE("warp_image: fronto-parallel plane under x-translation") {
  const CameraIntrinsics k(80, 80, 31.5, 23.5, 64, 48);
  const double z = 600, tx = 45;  // 6 px of disparity
  const double shift = k.fx * tx / z;
  // Linear texture: bilinear interpolation is exact, so any shift works.
  ImageGrid src(48, 64, 1);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) src(y, x) = 0.01 * x + 0.003 * y;
  }
  const DepthMap depth(48, 64, 1, z);
  const auto w = warp_image(src, depth, k, k, RigidTransform::translate(Point3(tx, 0, 0)), {0, true});
  int checked = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool inside = x + shift <= 63;
      CHECK((w.mask(y, x) > 0) == inside);
      if (!inside) continue;
      CHECK(std::abs(w.image(y, x) - (0.01 * (x + shift) + 0.003 * y)) <= 1e-6);
      // d(image)/d(depth) = slope * d(x')/dz.
      CHECK(w.d_ddepth(y, x) == doctest::Approx(0.01 * -k.fx * tx / (z * z)).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("warp_image: everything out of frame") {
  const CameraIntrinsics k(80, 80, 31.5, 23.5, 64, 48);
  Lcg rng(5);
  const ImageGrid src = testutil::random_image(rng, 48, 64);
  const auto w = warp_image(src, DepthMap(48, 64, 1, 600), k, k, RigidTransform::translate(Point3(1e4, 0, 0)));
  CHECK(w.mask.array().maxCoeff() == 0);
  CHECK(w.image.array().abs().maxCoeff() == 0);
  for (auto c : w.cells) CHECK(c == -1);
}

TEST_CASE("warp_image: invalid depth is masked") {
  const CameraIntrinsics k(80, 80, 7.5, 7.5, 16, 16);
  Lcg rng(6);
  const ImageGrid src = testutil::random_image(rng, 16, 16);
  DepthMap d(16, 16, 1, 600);
  d(3, 4) = 0;
  const auto w = warp_image(src, d, k, k, RigidTransform::identity());
  CHECK(w.mask(3, 4) == 0);
  CHECK(w.image(3, 4) == 0);
  CHECK(w.mask(3, 5) == 1);
}

TEST_CASE("warp_image_at_depth agrees with a constant depth map") {
  const CameraIntrinsics k(80, 80, 15.5, 11.5, 32, 24);
  Lcg rng(8);
  const ImageGrid src = testutil::random_image(rng, 24, 32, 2);
  const RigidTransform t = RigidTransform::translate(Point3(25, -10, 5));
  const auto a = warp_image_at_depth(src, 640, 24, 32, k, k, t);
  const auto b = warp_image(src, DepthMap(24, 32, 1, 640), k, k, t);
  CHECK((a.image.array() == b.image.array()).all());
  CHECK((a.mask.array() == b.mask.array()).all());
}
