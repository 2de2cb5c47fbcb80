#pragma once

#include "mvs/camera.hpp"
#include "mvs/fusion.hpp"
#include "mvs/image.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvs {

/// Malformed or unreadable file; the message names the file and the field.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// PFM with 1 ("Pf") or 3 ("PF") channels, float32. Written little-endian
/// with scale -1.0 and rows bottom-up; both byte orders are read.
ImageGrid read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ImageGrid& img);

/// Binary PPM (P6) or PGM (P5), maxval <= 255, values mapped to [0, 1].
ImageGrid read_pnm(const std::filesystem::path& path);
/// P6 for 3 channels and P5 for 1; values are clamped to [0, 1] and rounded
/// to the nearest of 256 levels.
void write_pnm(const std::filesystem::path& path, const ImageGrid& img);

/// ASCII PLY with float x, y, z and, if present, uchar red, green, blue.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

/// One block per view:
///   view <index>
///   intrinsics fx fy cx cy width height
///   rotation r00 r01 r02 r10 r11 r12 r20 r21 r22
///   translation tx ty tz
/// The transform is world-to-camera. Numbers are written in shortest
/// round-trip form so they read back exactly.
void write_cameras(const std::filesystem::path& path, const std::vector<CameraModel>& cams);
std::vector<CameraModel> read_cameras(const std::filesystem::path& path);

/// Whole-file text helpers, binary mode so output bytes do not depend on the platform.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mvs
