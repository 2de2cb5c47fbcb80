#include "mvs/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mvs {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& field, const std::string& what) {
  throw FormatError(path.string() + ": " + field + ": " + what);
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "file", "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "file", "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(path, "file", "write failed");
}

// Header tokenizer for the netpbm-style formats: whitespace separated, '#'
// starts a comment that runs to the end of the line.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const fs::path& path) : b_(bytes), path_(path) {}

  std::string token(const std::string& field, bool comments = true) {
    skip(comments);
    const std::size_t start = pos_;
    while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) fail(path_, field, "unexpected end of header");
    return b_.substr(start, pos_ - start);
  }

  long integer(const std::string& field) {
    const std::string t = token(field);
    long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail(path_, field, "expected an integer, got '" + t + "'");
    return v;
  }

  double real(const std::string& field) {
    const std::string t = token(field);
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail(path_, field, "expected a number, got '" + t + "'");
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t payload_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      fail(path_, "header", "missing separator before data");
    }
    return pos_ + 1;
  }

 private:
  void skip(bool comments) {
    while (pos_ < b_.size()) {
      if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else if (comments && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

template <typename T>
std::string shortest(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

ImageGrid read_pfm(const fs::path& path) {
  const std::string bytes = read_all(path);
  HeaderReader h(bytes, path);
  const std::string magic = h.token("magic", false);
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    fail(path, "magic", "expected 'Pf' or 'PF', got '" + magic + "'");
  }
  const long w = h.integer("width"), hgt = h.integer("height");
  if (w <= 0 || hgt <= 0) fail(path, "dimensions", "width and height must be positive");
  const double scale = h.real("scale");
  if (scale == 0 || !std::isfinite(scale)) fail(path, "scale", "must be a nonzero number");
  const bool little = scale < 0;
  const std::size_t start = h.payload_start();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(hgt) * channels;
  if (bytes.size() - start < count * 4) fail(path, "data", "file is truncated");

  ImageGrid img(static_cast<int>(hgt), static_cast<int>(w), channels);
  const bool swap = little != (std::endian::native == std::endian::little);
  std::size_t off = start;
  for (long row = hgt - 1; row >= 0; --row) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c, off += 4) {
        std::uint32_t u;
        std::memcpy(&u, bytes.data() + off, 4);
        if (swap) u = __builtin_bswap32(u);
        img(static_cast<int>(row), static_cast<int>(x), c) = static_cast<double>(std::bit_cast<float>(u));
      }
    }
  }
  return img;
}

void write_pfm(const fs::path& path, const ImageGrid& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    fail(path, "channels", "PFM holds 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  std::string out = std::string(img.channels() == 1 ? "Pf" : "PF") + "\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(img.size()) * 4);
  std::size_t off = header;
  for (int row = img.height() - 1; row >= 0; --row) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c, off += 4) {
        std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(img(row, x, c)));
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        std::memcpy(out.data() + off, &u, 4);
      }
    }
  }
  write_all(path, out);
}

ImageGrid read_pnm(const fs::path& path) {
  const std::string bytes = read_all(path);
  HeaderReader h(bytes, path);
  const std::string magic = h.token("magic");
  if (magic != "P6" && magic != "P5") fail(path, "magic", "expected binary 'P6' or 'P5', got '" + magic + "'");
  const int channels = magic == "P6" ? 3 : 1;
  const long w = h.integer("width"), hgt = h.integer("height"), maxval = h.integer("maxval");
  if (w <= 0 || hgt <= 0) fail(path, "dimensions", "width and height must be positive");
  if (maxval <= 0 || maxval > 255) fail(path, "maxval", "only 8-bit images (maxval 1..255) are supported");
  const std::size_t start = h.payload_start();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(hgt) * channels;
  if (bytes.size() - start < count) fail(path, "data", "file is truncated");
  ImageGrid img(static_cast<int>(hgt), static_cast<int>(w), channels);
  for (std::size_t i = 0; i < count; ++i) {
    img.array()[static_cast<Eigen::Index>(i)] =
        static_cast<double>(static_cast<unsigned char>(bytes[start + i])) / static_cast<double>(maxval);
  }
  return img;
}

void write_pnm(const fs::path& path, const ImageGrid& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    fail(path, "channels", "PPM/PGM holds 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  std::string out = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.array()[i], 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  write_all(path, out);
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  if (cloud.has_colors() && cloud.colors.size() != cloud.points.size()) {
    fail(path, "colors", "one colour per point required");
  }
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors()) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    out += shortest(static_cast<float>(p.x())) + " " + shortest(static_cast<float>(p.y())) + " " +
           shortest(static_cast<float>(p.z()));
    if (cloud.has_colors()) {
      for (int c = 0; c < 3; ++c) {
        out += " " + std::to_string(std::lround(std::clamp(cloud.colors[i][c], 0.0, 1.0) * 255.0));
      }
    }
    out += "\n";
  }
  write_all(path, out);
}

PointCloud read_ply(const fs::path& path) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line) || line != "ply") fail(path, "magic", "expected 'ply'");
  if (!std::getline(in, line) || line != "format ascii 1.0") fail(path, "format", "only 'format ascii 1.0' is supported");
  long count = -1;
  std::vector<std::string> props;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "comment" || kw.empty()) continue;
    if (kw == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || count < 0) fail(path, "element", "expected 'element vertex <count>'");
    } else if (kw == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else {
      fail(path, "header", "unexpected line '" + line + "'");
    }
  }
  if (line != "end_header") fail(path, "header", "missing end_header");
  const std::vector<std::string> xyz{"x", "y", "z"}, rgb{"x", "y", "z", "red", "green", "blue"};
  if (props != xyz && props != rgb) fail(path, "property", "expected x y z [red green blue]");
  if (count < 0) fail(path, "element", "missing vertex count");
  const bool colored = props.size() == 6;
  PointCloud cloud;
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) fail(path, "vertex " + std::to_string(i), "missing");
    std::istringstream ls(line);
    Point3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) fail(path, "vertex " + std::to_string(i), "bad coordinates");
    cloud.points.push_back(p);
    if (colored) {
      int r, g, b;
      if (!(ls >> r >> g >> b)) fail(path, "vertex " + std::to_string(i), "bad colour");
      cloud.colors.emplace_back(r / 255.0, g / 255.0, b / 255.0);
    }
  }
  return cloud;
}

void write_cameras(const fs::path& path, const std::vector<CameraModel>& cams) {
  std::string out;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const auto& k = cams[i].intrinsics;
    const auto& t = cams[i].world_to_camera;
    out += "view " + std::to_string(i) + "\n";
    out += "intrinsics " + shortest(k.fx) + " " + shortest(k.fy) + " " + shortest(k.cx) + " " + shortest(k.cy) + " " +
           std::to_string(k.width) + " " + std::to_string(k.height) + "\n";
    out += "rotation";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out += " " + shortest(t.rotation(r, c));
    }
    out += "\ntranslation " + shortest(t.translation.x()) + " " + shortest(t.translation.y()) + " " +
           shortest(t.translation.z()) + "\n";
  }
  write_all(path, out);
}

std::vector<CameraModel> read_cameras(const fs::path& path) {
  const std::string bytes = read_all(path);
  HeaderReader h(bytes, path);
  std::vector<CameraModel> cams;
  auto expect = [&](const std::string& field, const std::string& kw) {
    const std::string t = h.token(field);
    if (t != kw) fail(path, field, "expected '" + kw + "', got '" + t + "'");
  };
  if (bytes.find_first_not_of(" \t\r\n") == std::string::npos) fail(path, "view", "no cameras");
  while (true) {
    const std::string view = "view " + std::to_string(cams.size());
    // End of file is only legal between blocks.
    std::string kw;
    try {
      kw = h.token(view);
    } catch (const FormatError&) {
      break;
    }
    if (kw != "view") fail(path, view, "expected 'view', got '" + kw + "'");
    const long index = h.integer(view + " index");
    if (index != static_cast<long>(cams.size())) fail(path, view, "views must be numbered consecutively from 0");
    CameraModel cam;
    expect(view + " intrinsics", "intrinsics");
    cam.intrinsics.fx = h.real(view + " fx");
    cam.intrinsics.fy = h.real(view + " fy");
    cam.intrinsics.cx = h.real(view + " cx");
    cam.intrinsics.cy = h.real(view + " cy");
    cam.intrinsics.width = static_cast<int>(h.integer(view + " width"));
    cam.intrinsics.height = static_cast<int>(h.integer(view + " height"));
    expect(view + " rotation", "rotation");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cam.world_to_camera.rotation(r, c) = h.real(view + " rotation");
    }
    expect(view + " translation", "translation");
    for (int c = 0; c < 3; ++c) cam.world_to_camera.translation[c] = h.real(view + " translation");
    try {
      cam.intrinsics.validate();
      cam.world_to_camera.validate(1e-6);
    } catch (const std::invalid_argument& e) {
      fail(path, view, e.what());
    }
    cams.push_back(cam);
  }
  return cams;
}

void write_text(const fs::path& path, const std::string& text) { write_all(path, text); }

std::string read_text(const fs::path& path) { return read_all(path); }

}  // namespace mvs
