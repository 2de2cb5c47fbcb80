#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace mvs {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Continuous pixel position; integer coordinates are pixel centers.
using PixelCoord = Vec2<double>;
/// Point in mm, camera or world frame depending on context.
using Point3 = Vec3<double>;

/// Pinhole intrinsics in pixels for an image of `width` x `height`.
template <typename Scalar>
struct Intrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  int width = 1;
  int height = 1;

  Intrinsics() = default;
  Intrinsics(Scalar fx_, Scalar fy_, Scalar cx_, Scalar cy_, int width_, int height_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {}

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Intrinsics: focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw std::invalid_argument("Intrinsics: size must be positive");
    if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height)) {
      throw std::invalid_argument("Intrinsics: principal point outside the image");
    }
  }

  Mat3<Scalar> matrix() const {
    Mat3<Scalar> k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  /// Viewing ray K^-1 [x y 1]^T with unit z.
  Vec3<Scalar> ray(const Vec2<Scalar>& p) const {
    return {(p.x() - cx) / fx, (p.y() - cy) / fy, Scalar(1)};
  }

  /// Intrinsics for the 2x2 average-pooled image. Pooled pixel j covers input
  /// pixels 2j and 2j+1, so its center sits at input coordinate 2j + 0.5.
  Intrinsics half() const {
    return Intrinsics(fx / 2, fy / 2, (cx - Scalar(0.5)) / 2, (cy - Scalar(0.5)) / 2, width / 2,
                      height / 2);
  }

  /// Applies half() `levels` times.
  Intrinsics downscaled(int levels) const {
    Intrinsics k = *this;
    for (int i = 0; i < levels; ++i) k = k.half();
    return k;
  }
};

using CameraIntrinsics = Intrinsics<double>;

/// x -> R x + t.
template <typename Scalar>
struct Rigid {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  Rigid() = default;
  Rigid(const Mat3<Scalar>& r, const Vec3<Scalar>& t) : rotation(r), translation(t) {}

  static Rigid identity() { return {}; }
  static Rigid translate(const Vec3<Scalar>& t) { return {Mat3<Scalar>::Identity(), t}; }

  void validate(Scalar tol = Scalar(1e-9)) const {
    const Scalar ortho = (rotation.transpose() * rotation - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol) || !(std::abs(rotation.determinant() - Scalar(1)) <= tol)) {
      throw std::invalid_argument("RigidTransform: rotation is not a proper orthonormal matrix");
    }
    if (!translation.allFinite()) throw std::invalid_argument("RigidTransform: non-finite translation");
  }

  Vec3<Scalar> operator*(const Vec3<Scalar>& p) const { return rotation * p + translation; }
  Rigid operator*(const Rigid& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Rigid inverse() const {
    const Mat3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
};

using RigidTransform = Rigid<double>;

/// Intrinsics plus the world-to-camera transform of one view.
struct CameraModel {
  CameraIntrinsics intrinsics;
  RigidTransform world_to_camera;

  RigidTransform camera_to_world() const { return world_to_camera.inverse(); }
  Point3 center() const { return camera_to_world().translation; }
  CameraModel downscaled(int levels) const { return {intrinsics.downscaled(levels), world_to_camera}; }
};

/// Transform taking reference-camera coordinates to source-camera coordinates.
inline RigidTransform relative_transform(const CameraModel& ref, const CameraModel& src) {
  return src.world_to_camera * ref.world_to_camera.inverse();
}

/// Camera-frame point seen at pixel p with depth z.
template <typename Scalar>
Vec3<Scalar> backproject(const Vec2<Scalar>& p, Scalar z, const Intrinsics<Scalar>& k) {
  if (!(z > 0)) throw std::domain_error("backproject: depth must be positive, got " + std::to_string(double(z)));
  return k.ray(p) * z;
}

template <typename Scalar>
struct Projection {
  Vec2<Scalar> pixel;
  Scalar depth;
};

template <typename Scalar>
std::optional<Projection<Scalar>> try_project(const Vec3<Scalar>& p, const Intrinsics<Scalar>& k) {
  if (!(p.z() > 0)) return std::nullopt;
  return Projection<Scalar>{{k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy}, p.z()};
}

/// Throws std::domain_error for points on or behind the image plane.
template <typename Scalar>
Projection<Scalar> project(const Vec3<Scalar>& p, const Intrinsics<Scalar>& k) {
  auto r = try_project(p, k);
  if (!r) throw std::domain_error("project: point is behind the camera");
  return *r;
}

/// Correspondence of a reference pixel in a source view, with d(pixel)/d(depth).
template <typename Scalar>
struct Transfer {
  Vec2<Scalar> pixel = Vec2<Scalar>::Zero();
  Scalar depth{0};
  Vec2<Scalar> dpixel_ddepth = Vec2<Scalar>::Zero();
  bool valid = false;
};

/// Maps reference pixel p at depth z into the source view; T takes reference
/// camera coordinates to source camera coordinates. Invalid when the point
/// lands on or behind the source image plane.
template <typename Scalar>
Transfer<Scalar> transfer_pixel(const Vec2<Scalar>& p, Scalar z, const Intrinsics<Scalar>& k_ref,
                                const Intrinsics<Scalar>& k_src, const Rigid<Scalar>& t) {
  Transfer<Scalar> out;
  if (!(z > 0)) return out;
  const Vec3<Scalar> ray = k_ref.ray(p);
  const Vec3<Scalar> dir = t.rotation * ray;  // d(point)/d(depth)
  const Vec3<Scalar> q = dir * z + t.translation;
  if (!(q.z() > 0)) return out;
  const Scalar inv_z = Scalar(1) / q.z();
  out.pixel = {k_src.fx * q.x() * inv_z + k_src.cx, k_src.fy * q.y() * inv_z + k_src.cy};
  out.depth = q.z();
  out.dpixel_ddepth = {k_src.fx * (dir.x() * q.z() - q.x() * dir.z()) * inv_z * inv_z,
                       k_src.fy * (dir.y() * q.z() - q.y() * dir.z()) * inv_z * inv_z};
  out.valid = true;
  return out;
}

}  // namespace mvs
