#pragma once

#include "mvs/camera.hpp"
#include "mvs/image.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mvs {

/// Invalid scene or pipeline configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit LCG: state = state * 6364136223846793005 + 1442695040888963407.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }
  /// Top 53 bits of the next state, in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller; consumes two draws per call.
  double normal();

 private:
  std::uint64_t state_;
};

/// World-frame plane n . P = offset.
struct PlaneGeometry {
  Point3 normal{0, 0, 1};
  double offset = 600;
};

struct SphereGeometry {
  Point3 center{0, 0, 700};
  double radius = 150;
};

using Geometry = std::variant<PlaneGeometry, SphereGeometry>;

/// 3D checkerboard of cubes with edge `period` mm.
struct CheckerTexture {
  double period = 8;
};

/// Octave sum of seeded value noise over world coordinates; `scale` is the
/// lattice spacing of the first octave in mm.
struct NoiseTexture {
  std::uint64_t seed = 1;
  int octaves = 3;
  double scale = 6;
};

/// Image projected from the first view onto the surface.
struct ImageTexture {
  std::string path;
  ImageGrid image;
};

using Texture = std::variant<CheckerTexture, NoiseTexture, ImageTexture>;

/// Seeded value noise in [0, 1], quintic fade, 256-entry permutation.
class ValueNoise {
 public:
  explicit ValueNoise(std::uint64_t seed);
  double operator()(const Point3& p) const;
  double fractal(const Point3& p, int octaves) const;

 private:
  double lattice(long x, long y, long z) const;
  std::array<int, 256> perm_{};
  std::array<double, 256> values_{};
};

struct SceneSpec {
  Geometry geometry = PlaneGeometry{};
  Texture texture = NoiseTexture{};
  std::vector<CameraModel> views;
  int width = 64;
  int height = 48;
  DepthRange range;
  double image_noise = 0;  // std of additive Gaussian noise on [0, 1] intensities

  void validate() const;
};

struct RenderedView {
  ImageGrid image;  // 3 channels in [0, 1]
  DepthMap depth;   // ground truth, 0 where the ray misses
};

/// Distance along the unit-z viewing ray of pixel p to the surface, which is
/// the camera-frame depth. Empty when the ray misses.
std::optional<double> intersect(const Geometry& g, const CameraModel& cam, const PixelCoord& p);

/// Surface intensity at a world point.
double texture_at(const Texture& t, const Point3& world, const std::vector<CameraModel>& views);

/// Ray-casts every view. Image noise is drawn from Lcg(seed) in view, row,
/// column, channel order.
std::vector<RenderedView> render_scene(const SceneSpec& spec, std::uint64_t seed = 0);

}  // namespace mvs
