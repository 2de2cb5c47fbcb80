#include "mvs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mvs {

double Lcg::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ValueNoise::ValueNoise(std::uint64_t seed) {
  Lcg rng(seed);
  for (int i = 0; i < 256; ++i) perm_[i] = i;
  // Fisher-Yates
  for (int i = 255; i > 0; --i) {
    const int j = static_cast<int>(rng.next() >> 33) % (i + 1);
    std::swap(perm_[i], perm_[j]);
  }
  for (double& v : values_) v = rng.uniform();
}

double ValueNoise::lattice(long x, long y, long z) const {
  const int h = perm_[(perm_[(perm_[x & 255] + (y & 255)) & 255] + (z & 255)) & 255];
  return values_[h];
}

double ValueNoise::operator()(const Point3& p) const {
  auto fade = [](double t) { return t * t * t * (t * (t * 6 - 15) + 10); };
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy), z0 = static_cast<long>(fz);
  const double u = fade(p.x() - fx), v = fade(p.y() - fy), w = fade(p.z() - fz);
  auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
  const double x00 = lerp(lattice(x0, y0, z0), lattice(x0 + 1, y0, z0), u);
  const double x10 = lerp(lattice(x0, y0 + 1, z0), lattice(x0 + 1, y0 + 1, z0), u);
  const double x01 = lerp(lattice(x0, y0, z0 + 1), lattice(x0 + 1, y0, z0 + 1), u);
  const double x11 = lerp(lattice(x0, y0 + 1, z0 + 1), lattice(x0 + 1, y0 + 1, z0 + 1), u);
  return lerp(lerp(x00, x10, v), lerp(x01, x11, v), w);
}

double ValueNoise::fractal(const Point3& p, int octaves) const {
  double sum = 0, norm = 0, amp = 1, freq = 1;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * (*this)(p * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2;
  }
  return sum / norm;
}

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("scene: width and height must be positive");
  if (views.empty()) throw ConfigError("scene: at least one view is required");
  if (!(range.min > 0) || !(range.max > range.min)) throw ConfigError("scene: depth range must satisfy 0 < min < max");
  if (!(image_noise >= 0)) throw ConfigError("scene: image_noise must be >= 0");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& k = views[i].intrinsics;
    const std::string tag = "view." + std::to_string(i);
    if (k.width != width || k.height != height) throw ConfigError(tag + ": intrinsics size differs from the scene size");
    try {
      k.validate();
      views[i].world_to_camera.validate(1e-6);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(tag + ": " + e.what());
    }
  }
  if (const auto* p = std::get_if<PlaneGeometry>(&geometry)) {
    if (!(p->normal.norm() > 0)) throw ConfigError("scene: plane normal must be nonzero");
  } else if (const auto* s = std::get_if<SphereGeometry>(&geometry)) {
    if (!(s->radius > 0)) throw ConfigError("scene: sphere radius must be positive");
  }
  if (const auto* c = std::get_if<CheckerTexture>(&texture)) {
    if (!(c->period > 0)) throw ConfigError("scene: checker period must be positive");
  } else if (const auto* n = std::get_if<NoiseTexture>(&texture)) {
    if (n->octaves < 1) throw ConfigError("scene: noise octaves must be >= 1");
    if (!(n->scale > 0)) throw ConfigError("scene: noise scale must be positive");
  } else if (const auto* im = std::get_if<ImageTexture>(&texture)) {
    if (im->image.empty()) throw ConfigError("scene: texture image '" + im->path + "' is empty");
  }
}

std::optional<double> intersect(const Geometry& g, const CameraModel& cam, const PixelCoord& p) {
  const RigidTransform c2w = cam.camera_to_world();
  const Point3 origin = c2w.translation;
  const Point3 dir = c2w.rotation * cam.intrinsics.ray(p);  // camera z component is 1
  if (const auto* plane = std::get_if<PlaneGeometry>(&g)) {
    const double denom = plane->normal.dot(dir);
    if (denom == 0) return std::nullopt;
    const double s = (plane->offset - plane->normal.dot(origin)) / denom;
    if (!(s > 0)) return std::nullopt;
    return s;
  }
  const auto& sphere = std::get<SphereGeometry>(g);
  const Point3 oc = origin - sphere.center;
  const double a = dir.squaredNorm();
  const double b = 2 * dir.dot(oc);
  const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double s1 = (-b - root) / (2 * a), s2 = (-b + root) / (2 * a);
  if (s1 > 0) return s1;
  if (s2 > 0) return s2;
  return std::nullopt;
}

namespace {

double sample_clamped(const ImageGrid& luma, const PixelCoord& p) {
  const double x = std::clamp(p.x(), 0.0, static_cast<double>(luma.width() - 1));
  const double y = std::clamp(p.y(), 0.0, static_cast<double>(luma.height() - 1));
  const int x0 = std::min(static_cast<int>(x), std::max(luma.width() - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(luma.height() - 2, 0));
  const double ax = x - x0, ay = y - y0;
  return (1 - ay) * ((1 - ax) * luma.clamped(y0, x0) + ax * luma.clamped(y0, x0 + 1)) +
         ay * ((1 - ax) * luma.clamped(y0 + 1, x0) + ax * luma.clamped(y0 + 1, x0 + 1));
}

}  // namespace

double texture_at(const Texture& t, const Point3& world, const std::vector<CameraModel>& views) {
  if (const auto* c = std::get_if<CheckerTexture>(&t)) {
    const long s = static_cast<long>(std::floor(world.x() / c->period)) +
                   static_cast<long>(std::floor(world.y() / c->period)) +
                   static_cast<long>(std::floor(world.z() / c->period));
    return (s & 1) ? 0.8 : 0.2;
  }
  if (const auto* n = std::get_if<NoiseTexture>(&t)) {
    // Built per call would be wasteful; render_scene caches one instance.
    return ValueNoise(n->seed).fractal(world / n->scale, n->octaves);
  }
  const auto& im = std::get<ImageTexture>(t);
  const auto proj = try_project<double>(views.front().world_to_camera * world, views.front().intrinsics);
  if (!proj) return 0;
  return sample_clamped(to_luma(im.image), proj->pixel);
}

std::vector<RenderedView> render_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::optional<ValueNoise> noise;
  if (const auto* n = std::get_if<NoiseTexture>(&spec.texture)) noise.emplace(n->seed);
  ImageGrid tex_luma;
  if (const auto* im = std::get_if<ImageTexture>(&spec.texture)) tex_luma = to_luma(im->image);

  auto shade = [&](const Point3& world) {
    if (noise) {
      const auto& n = std::get<NoiseTexture>(spec.texture);
      return noise->fractal(world / n.scale, n.octaves);
    }
    if (!tex_luma.empty()) {
      const auto proj = try_project<double>(spec.views.front().world_to_camera * world, spec.views.front().intrinsics);
      return proj ? sample_clamped(tex_luma, proj->pixel) : 0.0;
    }
    return texture_at(spec.texture, world, spec.views);
  };

  Lcg rng(seed);
  std::vector<RenderedView> out;
  for (std::size_t i = 0; i < spec.views.size(); ++i) {
    const CameraModel& cam = spec.views[i];
    const RigidTransform c2w = cam.camera_to_world();
    RenderedView v{ImageGrid(spec.height, spec.width, 3), DepthMap(spec.height, spec.width, 1)};
    int in_range = 0;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const auto z = intersect(spec.geometry, cam, PixelCoord(x, y));
        if (!z) continue;
        v.depth(y, x) = *z;
        if (spec.range.contains(*z)) ++in_range;
        const double value = shade(c2w * backproject<double>(PixelCoord(x, y), *z, cam.intrinsics));
        for (int c = 0; c < 3; ++c) v.image(y, x, c) = value;
      }
    }
    if (in_range == 0) {
      throw ConfigError("scene: geometry is not visible inside the depth range from view " + std::to_string(i));
    }
    if (spec.image_noise > 0) {
      for (Eigen::Index k = 0; k < v.image.size(); ++k) {
        v.image.array()[k] = std::clamp(v.image.array()[k] + spec.image_noise * rng.normal(), 0.0, 1.0);
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace mvs
