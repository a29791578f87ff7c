#pragma once

#include <cstdint>
#include <vector>

namespace fm {

// Interleaved 8-bit RGB image, row-major.
class Image {
 public:
  Image() = default;
  Image(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t& at(int y, int x, int c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Per-pixel weights in [0,1]; 1 = inside the face region.
class RegionMask {
 public:
  RegionMask() = default;
  RegionMask(int height, int width, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  double& at(int y, int x) { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int y, int x) const {
    return weights_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<double>& weights() const { return weights_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> weights_;
};

// Throws ArgumentError if the image is smaller than 8x8.
void check_image(const Image& img);

// Rec. 601 luma as doubles, row-major.
std::vector<double> grayscale(const Image& img);

inline std::uint8_t clamp_to_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

}  // namespace fm
