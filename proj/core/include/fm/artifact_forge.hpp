#pragma once

// Controlled face-region perturbations at graded severity.
//
// All kernels are pure functions of their arguments. At p = 0 every kind
// returns the input unchanged, byte for byte. Pixels whose mask weight is 0
// are never modified (warp displacement is scaled by the mask weight, so
// the same holds for warp; its displacement is capped at
// kWarpCapFraction * W * p pixels).

#include <cstdint>
#include <vector>

#include "fm/activation_store.hpp"
#include "fm/image.hpp"

namespace fm {

inline constexpr double kLightingGainSlope = 0.6;
inline constexpr double kColorTint[3] = {18.0, -6.0, -12.0};
inline constexpr double kWarpCapFraction = 0.06;
inline constexpr int kWarpGridSize = 4;
inline constexpr double kDefaultMaxBlurRadiusPx = 10.0;
inline constexpr double kDefaultFeatherPx = 16.0;

struct ArtifactSpec {
  ArtifactKind kind = ArtifactKind::blur;
  std::vector<double> grid;
  double max_blur_radius_px = kDefaultMaxBlurRadiusPx;
  std::uint64_t seed = 0;
};

// Throws ArgumentError unless kind is one of the four perturbations and the
// grid starts at 0, is strictly increasing and stays inside [0,1].
void validate(const ArtifactSpec& spec);

// T equally spaced levels from 0 to p_max inclusive. Levels are snapped to
// 12 decimal places so decimal grids such as 0.0, 0.1, ..., 0.7 come out as
// the exact nearest doubles of their literals.
std::vector<double> severity_grid(int levels, double p_max);

// Centered ellipse, semi-axes 0.35 W and 0.45 H, weight 1 inside and
// linearly feathered to 0 over `feather_px` outside the boundary.
RegionMask default_face_mask(int height, int width, double feather_px = kDefaultFeatherPx);

// Indicator of the feathered seam: 1 where the mask weight lies strictly
// between 0 and 1, else 0. Blur replaces these pixels outright.
RegionMask boundary_band(const RegionMask& mask);

Image apply_artifact(const Image& img, ArtifactKind kind, double p,
                     const RegionMask& mask, std::uint64_t seed = 0,
                     double max_blur_radius_px = kDefaultMaxBlurRadiusPx);

// Individual kernels; p is assumed validated.
Image apply_warp(const Image& img, double p, const RegionMask& mask, std::uint64_t seed);
Image apply_lighting(const Image& img, double p, const RegionMask& mask);
Image apply_blur(const Image& img, double p, const RegionMask& mask,
                 double max_blur_radius_px);
Image apply_color(const Image& img, double p, const RegionMask& mask);

// Smooth displacement field (dx, dy interleaved) with max magnitude 1,
// built from a seeded 4x4 grid of random vectors and bicubic upsampling.
std::vector<double> warp_field(int height, int width, std::uint64_t seed);

// Separable Gaussian of one double plane with edge clamping; the kernel is
// truncated at 3 sigma.
std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int height,
                                        int width, double sigma);

// Weighted variance of the 4-neighbour Laplacian of the luma channel over
// pixels whose whole stencil has nonzero weight, so the region's outer edge
// does not contribute.
double laplacian_variance(const Image& img, const RegionMask& weights);

}  // namespace fm
