#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvs {

/// Dense H x W x C raster stored row-major in (y, x, c) order.
///
/// The backing store is an Eigen column array so whole-image arithmetic can be
/// written as expressions on `array()`.
template <typename Scalar>
class Image {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Image() = default;
  Image(int height, int width, int channels = 1, Scalar fill = Scalar(0))
      : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0) {
      throw std::invalid_argument("Image: dimensions must be positive, got " +
                                  std::to_string(height) + "x" + std::to_string(width) + "x" +
                                  std::to_string(channels));
    }
    data_ = Storage::Constant(static_cast<Eigen::Index>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height_) * width_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool same_extent(const Image& o) const { return height_ == o.height_ && width_ == o.width_; }

  bool contains(int y, int x) const { return y >= 0 && y < height_ && x >= 0 && x < width_; }

  Eigen::Index index(int y, int x, int c = 0) const {
    return (static_cast<Eigen::Index>(y) * width_ + x) * channels_ + c;
  }

  Scalar& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const Scalar& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  // Clamp-to-edge access.
  const Scalar& clamped(int y, int x, int c = 0) const {
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    return (*this)(y, x, c);
  }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Map of one pixel's channel vector.
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> pixel(int y, int x) const {
    return {data_.data() + index(y, x), channels_};
  }
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> pixel(int y, int x) {
    return {data_.data() + index(y, x), channels_};
  }

  /// Single channel extracted as its own image.
  Image channel(int c) const {
    Image out(height_, width_, 1);
    for (Eigen::Index i = 0; i < pixels(); ++i) out.data_[i] = data_[i * channels_ + c];
    return out;
  }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out(height_, width_, channels_);
    out.array() = data_.template cast<Other>();
    return out;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Storage data_;
};

using ImageGrid = Image<double>;
/// Single-channel depth in mm; 0 marks an invalid pixel.
using DepthMap = Image<double>;
/// Single-channel {0, 1}.
using BinaryMask = Image<double>;
/// Three-channel unit normals in the camera frame.
using NormalMap = Image<double>;
using ProbabilityMap = Image<double>;

/// D x H x W stack, one slice per depth hypothesis.
template <typename Scalar>
class Volume {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Volume() = default;
  Volume(int depth, int height, int width, Scalar fill = Scalar(0))
      : depth_(depth), height_(height), width_(width) {
    if (depth <= 0 || height <= 0 || width <= 0) {
      throw std::invalid_argument("Volume: dimensions must be positive");
    }
    data_ = Storage::Constant(static_cast<Eigen::Index>(depth) * height * width, fill);
  }

  int depth() const { return depth_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index slice_size() const { return static_cast<Eigen::Index>(height_) * width_; }

  Scalar& operator()(int d, int y, int x) { return data_[(d * slice_size()) + y * width_ + x]; }
  const Scalar& operator()(int d, int y, int x) const {
    return data_[(d * slice_size()) + y * width_ + x];
  }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

 private:
  int depth_ = 0;
  int height_ = 0;
  int width_ = 0;
  Storage data_;
};

using CostVolume = Volume<double>;
using ProbabilityVolume = Volume<double>;

/// Valid depth interval in mm.
struct DepthRange {
  double min = 425.0;
  double max = 935.0;

  bool contains(double z) const { return z >= min && z <= max; }
  double span() const { return max - min; }
};

/// Rec. 601 luma; single-channel input is returned unchanged.
inline ImageGrid to_luma(const ImageGrid& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw std::invalid_argument("to_luma: expected 1 or 3 channels, got " +
                                std::to_string(img.channels()));
  }
  ImageGrid out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out(y, x) = 0.299 * img(y, x, 0) + 0.587 * img(y, x, 1) + 0.114 * img(y, x, 2);
    }
  }
  return out;
}

}  // namespace mvs
