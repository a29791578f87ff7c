#include "fm/synthetic_faces.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fm/error.hpp"

namespace fm {
namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stateless lattice noise in [-1,1].
double hash_noise(std::uint64_t seed, int a, int b) {
  std::uint64_t h = seed ^ (static_cast<std::uint64_t>(a) * 0x9E3779B97F4A7C15ull) ^
                    (static_cast<std::uint64_t>(b) * 0xC2B2AE3D27D4EB4Full);
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDull;
  h ^= h >> 33;
  h *= 0xC4CEB9FE1A85EC53ull;
  h ^= h >> 33;
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double ellipse_r(double x, double y, double cx, double cy, double ax, double ay) {
  const double dx = (x - cx) / ax, dy = (y - cy) / ay;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Image synthesize_face(const FaceParams& params) {
  const int H = params.height, W = params.width;
  if (H < 8 || W < 8) throw ArgumentError("face image must be at least 8x8");
  const double q = params.fake_strength;
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("fake_strength must lie in [0,1]");

  std::mt19937_64 rng(params.seed);
  const double bg[3] = {40 + 120 * unit_uniform(rng), 40 + 120 * unit_uniform(rng),
                        40 + 120 * unit_uniform(rng)};
  const double grad_x = 40 * (unit_uniform(rng) - 0.5);
  const double grad_y = 40 * (unit_uniform(rng) - 0.5);
  const double skin[3] = {175 + 45 * unit_uniform(rng), 125 + 45 * unit_uniform(rng),
                          100 + 40 * unit_uniform(rng)};
  const double texture_amp = 10 + 8 * unit_uniform(rng);
  const double scale = 0.93 + 0.05 * unit_uniform(rng);
  const std::uint64_t tex_seed = rng();
  const std::uint64_t bg_seed = rng();

  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  const double ax = 0.35 * W * scale, ay = 0.45 * H * scale;
  const double eye_dx = 0.14 * W, eye_y = cy - 0.10 * H;
  const double eye_rx = 0.05 * W, eye_ry = 0.025 * H;
  const double eye_shift = q * 0.03 * H;  // right eye drifts down on fakes
  const double mouth_y = cy + 0.22 * H;
  const double seam = 1.0 + 5.0 * q;      // blend seam width in px
  const double face_gain = 1.0 + 0.12 * q;
  const double tint[3] = {10.0 * q, 0.0, -8.0 * q};

  Image img(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double back[3];
      const double bn = 14.0 * hash_noise(bg_seed, y, x);
      for (int c = 0; c < 3; ++c)
        back[c] = bg[c] + grad_x * (x - cx) / W + grad_y * (y - cy) / H + bn;

      // Mirror-symmetric texture: indexed by distance from the midline.
      const int mx = static_cast<int>(std::lround(std::abs(x - cx) * 2.0));
      const double tn = texture_amp * hash_noise(tex_seed, y, mx);
      double face[3];
      for (int c = 0; c < 3; ++c) face[c] = skin[c] + tn;

      const double shade = 1.0 - 0.25 * std::pow(ellipse_r(x, y, cx, cy, ax, ay), 4.0);
      for (double& f : face) f *= std::max(0.5, shade);

      const bool right = x > cx;
      const double ey = eye_y + (right ? eye_shift : 0.0);
      const double ex = cx + (right ? eye_dx : -eye_dx);
      if (ellipse_r(x, y, ex, ey, eye_rx, eye_ry) <= 1.0) {
        face[0] = 40 + 0.3 * tn;
        face[1] = 30 + 0.3 * tn;
        face[2] = 35 + 0.3 * tn;
      }
      if (ellipse_r(x, y, cx, mouth_y, 0.12 * W, 0.03 * H) <= 1.0) {
        face[0] = 150 + 0.5 * tn;
        face[1] = 60 + 0.5 * tn;
        face[2] = 70 + 0.5 * tn;
      }
      for (int c = 0; c < 3; ++c) face[c] = face[c] * face_gain + tint[c];

      // Signed distance to the face ellipse, approximated to first order.
      const double r = ellipse_r(x, y, cx, cy, ax, ay);
      double alpha = 1.0;
      if (r > 0.0) {
        const double gx = (x - cx) / (ax * ax * r), gy = (y - cy) / (ay * ay * r);
        const double dist = (r - 1.0) / std::sqrt(gx * gx + gy * gy);
        alpha = std::clamp(0.5 - dist / seam, 0.0, 1.0);
      }
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = clamp_to_u8(alpha * face[c] + (1.0 - alpha) * back[c]);
    }
  }
  return img;
}

}  // namespace fm
