#include "fm/image.hpp"

#include "fm/error.hpp"

namespace fm {

Image::Image(int height, int width, std::uint8_t fill)
    : height_(height),
      width_(width),
      pixels_(static_cast<std::size_t>(height) * width * 3, fill) {
  if (height < 0 || width < 0) throw ArgumentError("negative image dimensions");
}

RegionMask::RegionMask(int height, int width, double fill)
    : height_(height),
      width_(width),
      weights_(static_cast<std::size_t>(height) * width, fill) {
  if (height < 0 || width < 0) throw ArgumentError("negative mask dimensions");
}

void check_image(const Image& img) {
  if (img.height() < 8 || img.width() < 8)
    throw ArgumentError("image must be at least 8x8, got " +
                        std::to_string(img.height()) + "x" + std::to_string(img.width()));
}

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(static_cast<std::size_t>(img.height()) * img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      g[static_cast<std::size_t>(y) * img.width() + x] =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return g;
}

}  // namespace fm
