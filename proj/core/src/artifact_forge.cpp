#include "fm/artifact_forge.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fm/error.hpp"

namespace fm {
namespace {

void check_mask(const Image& img, const RegionMask& mask) {
  if (mask.height() != img.height() || mask.width() != img.width())
    throw ArgumentError("mask dimensions do not match image");
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Catmull-Rom weights for fractional offset t in [0,1).
void cubic_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

}  // namespace

void validate(const ArtifactSpec& spec) {
  if (spec.kind == ArtifactKind::none)
    throw ArgumentError("artifact spec kind must be warp, lighting, blur or color");
  if (spec.grid.empty() || spec.grid.front() != 0.0)
    throw ArgumentError("severity grid must start at 0.0");
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    if (!(spec.grid[i] >= 0.0 && spec.grid[i] <= 1.0))
      throw ArgumentError("severity grid values must lie in [0,1]");
    if (i > 0 && !(spec.grid[i] > spec.grid[i - 1]))
      throw ArgumentError("severity grid must be strictly increasing");
  }
  if (!(spec.max_blur_radius_px >= 0.0))
    throw ArgumentError("max_blur_radius_px must be non-negative");
}

std::vector<double> severity_grid(int levels, double p_max) {
  if (levels < 2) throw ArgumentError("severity grid needs T >= 2 levels");
  if (!(p_max > 0.0 && p_max <= 1.0)) throw ArgumentError("p_max must lie in (0,1]");
  std::vector<double> grid(levels);
  for (int t = 0; t < levels; ++t) {
    const double raw = p_max * t / (levels - 1);
    grid[t] = std::round(raw * 1e12) / 1e12;
  }
  grid.back() = p_max;
  return grid;
}

RegionMask default_face_mask(int height, int width, double feather_px) {
  if (height < 8 || width < 8) throw ArgumentError("mask must be at least 8x8");
  if (!(feather_px >= 0.0)) throw ArgumentError("feather_px must be non-negative");
  RegionMask mask(height, width);
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  const double ax = 0.35 * width, ay = 0.45 * height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double r = std::sqrt((dx * dx) / (ax * ax) + (dy * dy) / (ay * ay));
      double w;
      if (r <= 1.0) {
        w = 1.0;
      } else if (feather_px == 0.0) {
        w = 0.0;
      } else {
        // First-order distance to the ellipse: (r - 1) / |grad r|.
        const double gx = dx / (ax * ax * r), gy = dy / (ay * ay * r);
        const double dist = (r - 1.0) / std::sqrt(gx * gx + gy * gy);
        w = std::clamp(1.0 - dist / feather_px, 0.0, 1.0);
      }
      mask.at(y, x) = w;
    }
  }
  return mask;
}

RegionMask boundary_band(const RegionMask& mask) {
  RegionMask band(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const double m = mask.at(y, x);
      band.at(y, x) = (m > 0.0 && m < 1.0) ? 1.0 : 0.0;
    }
  return band;
}

Image apply_artifact(const Image& img, ArtifactKind kind, double p, const RegionMask& mask,
                     std::uint64_t seed, double max_blur_radius_px) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("severity p must lie in [0,1]");
  check_image(img);
  check_mask(img, mask);
  if (p == 0.0 || kind == ArtifactKind::none) return img;
  switch (kind) {
    case ArtifactKind::warp: return apply_warp(img, p, mask, seed);
    case ArtifactKind::lighting: return apply_lighting(img, p, mask);
    case ArtifactKind::blur: return apply_blur(img, p, mask, max_blur_radius_px);
    case ArtifactKind::color: return apply_color(img, p, mask);
    case ArtifactKind::none: break;
  }
  return img;
}

std::vector<double> warp_field(int height, int width, std::uint64_t seed) {
  constexpr int G = kWarpGridSize;
  std::mt19937_64 rng(seed);
  double grid[G][G][2];
  for (auto& row : grid)
    for (auto& v : row)
      for (double& c : v) c = 2.0 * unit_uniform(rng) - 1.0;

  std::vector<double> field(static_cast<std::size_t>(height) * width * 2);
  double max_mag = 0.0;
  for (int y = 0; y < height; ++y) {
    const double gy = (height > 1 ? double(y) / (height - 1) : 0.0) * (G - 1);
    const int iy = std::min(static_cast<int>(gy), G - 2);
    double wy[4];
    cubic_weights(gy - iy, wy);
    for (int x = 0; x < width; ++x) {
      const double gx = (width > 1 ? double(x) / (width - 1) : 0.0) * (G - 1);
      const int ix = std::min(static_cast<int>(gx), G - 2);
      double wx[4];
      cubic_weights(gx - ix, wx);
      double d[2] = {0.0, 0.0};
      for (int j = 0; j < 4; ++j) {
        const int sy = std::clamp(iy - 1 + j, 0, G - 1);
        for (int i = 0; i < 4; ++i) {
          const int sx = std::clamp(ix - 1 + i, 0, G - 1);
          d[0] += wy[j] * wx[i] * grid[sy][sx][0];
          d[1] += wy[j] * wx[i] * grid[sy][sx][1];
        }
      }
      const std::size_t k = (static_cast<std::size_t>(y) * width + x) * 2;
      field[k] = d[0];
      field[k + 1] = d[1];
      max_mag = std::max(max_mag, std::hypot(d[0], d[1]));
    }
  }
  if (max_mag > 0.0)
    for (double& v : field) v /= max_mag;
  return field;
}

Image apply_warp(const Image& img, double p, const RegionMask& mask, std::uint64_t seed) {
  const int H = img.height(), W = img.width();
  const auto field = warp_field(H, W, seed);
  const double cap = kWarpCapFraction * W * p;
  Image out = img;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double m = mask.at(y, x);
      if (m == 0.0) continue;
      const std::size_t k = (static_cast<std::size_t>(y) * W + x) * 2;
      const double sx = std::clamp(x + cap * m * field[k], 0.0, W - 1.0);
      const double sy = std::clamp(y + cap * m * field[k + 1], 0.0, H - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
        const double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
        out.at(y, x, c) = clamp_to_u8(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

Image apply_lighting(const Image& img, double p, const RegionMask& mask) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double gain = 1.0 + p * kLightingGainSlope * mask.at(y, x);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp_to_u8(img.at(y, x, c) * gain);
    }
  return out;
}

Image apply_color(const Image& img, double p, const RegionMask& mask) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double m = mask.at(y, x);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp_to_u8(img.at(y, x, c) + m * p * kColorTint[c]);
    }
  return out;
}

std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int height,
                                        int width, double sigma) {
  if (!(sigma > 0.0)) return plane;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  std::vector<double> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, width - 1);
        acc += kernel[i + radius] * plane[static_cast<std::size_t>(y) * width + sx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, height - 1);
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(sy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  return out;
}

Image apply_blur(const Image& img, double p, const RegionMask& mask,
                 double max_blur_radius_px) {
  const double sigma = p * max_blur_radius_px / 2.0;
  if (!(sigma > 0.0)) return img;
  const int H = img.height(), W = img.width();
  const RegionMask band = boundary_band(mask);
  Image out = img;
  std::vector<double> plane(static_cast<std::size_t>(H) * W);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        plane[static_cast<std::size_t>(y) * W + x] = img.at(y, x, c);
    const auto blurred = gaussian_blur_plane(plane, H, W, sigma);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (band.at(y, x) == 0.0) continue;
        out.at(y, x, c) = clamp_to_u8(blurred[static_cast<std::size_t>(y) * W + x]);
      }
  }
  return out;
}

double laplacian_variance(const Image& img, const RegionMask& weights) {
  check_mask(img, weights);
  const int H = img.height(), W = img.width();
  const auto g = grayscale(img);
  double sw = 0.0, s1 = 0.0, s2 = 0.0;
  for (int y = 1; y + 1 < H; ++y)
    for (int x = 1; x + 1 < W; ++x) {
      const double w = weights.at(y, x);
      if (w == 0.0 || weights.at(y - 1, x) == 0.0 || weights.at(y + 1, x) == 0.0 ||
          weights.at(y, x - 1) == 0.0 || weights.at(y, x + 1) == 0.0)
        continue;
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      const double lap = g[k - 1] + g[k + 1] + g[k - W] + g[k + W] - 4.0 * g[k];
      sw += w;
      s1 += w * lap;
      s2 += w * lap * lap;
    }
  if (sw == 0.0) return 0.0;
  const double mean = s1 / sw;
  return std::max(0.0, s2 / sw - mean * mean);
}

}  // namespace fm
