#include "fm/toy_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fm/artifact_forge.hpp"
#include "fm/error.hpp"

namespace fm {
namespace {

constexpr int kPooledGrid = 8;
constexpr int kStatCount = kPooledGrid * kPooledGrid + 3;
constexpr double kBlurReferenceVariance = 2000.0;

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

}  // namespace

std::string_view to_string(Sublayer s) {
  switch (s) {
    case Sublayer::attn: return "attn";
    case Sublayer::attn_proj: return "attn.proj";
    case Sublayer::mlp: return "mlp";
  }
  return "mlp";
}

Sublayer parse_sublayer(std::string_view s) {
  if (s == "attn") return Sublayer::attn;
  if (s == "attn.proj") return Sublayer::attn_proj;
  if (s == "mlp") return Sublayer::mlp;
  throw ArgumentError("unknown sublayer tag '" + std::string(s) + "'");
}

int kind_index(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::warp: return 0;
    case ArtifactKind::lighting: return 1;
    case ArtifactKind::blur: return 2;
    case ArtifactKind::color: return 3;
    case ArtifactKind::none: break;
  }
  throw ArgumentError("artifact kind 'none' has no planted direction");
}

Eigen::VectorXd pooled_statistics(const Image& img) {
  check_image(img);
  const int H = img.height(), W = img.width();
  const auto g = grayscale(img);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(kStatCount);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(kPooledGrid * kPooledGrid);
  double ch[3] = {0, 0, 0};
  for (int y = 0; y < H; ++y) {
    const int by = y * kPooledGrid / H;
    for (int x = 0; x < W; ++x) {
      const int bx = x * kPooledGrid / W;
      s[by * kPooledGrid + bx] += g[static_cast<std::size_t>(y) * W + x];
      counts[by * kPooledGrid + bx] += 1.0;
      for (int c = 0; c < 3; ++c) ch[c] += img.at(y, x, c);
    }
  }
  for (int i = 0; i < kPooledGrid * kPooledGrid; ++i) s[i] /= counts[i] * 255.0;
  const double n = static_cast<double>(H) * W;
  for (int c = 0; c < 3; ++c) s[kPooledGrid * kPooledGrid + c] = ch[c] / (n * 255.0);
  return s;
}

ArtifactEnergies artifact_energies(const Image& img, const RegionMask& mask) {
  const int H = img.height(), W = img.width();
  const auto g = grayscale(img);
  ArtifactEnergies e;

  double asym = 0.0, asym_w = 0.0;
  double yf = 0.0, yb = 0.0, wf = 0.0, wb = 0.0;
  double rbf = 0.0, rbb = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double m = mask.at(y, x);
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      const double rb = double(img.at(y, x, 0)) - double(img.at(y, x, 2));
      yf += m * g[k];
      yb += (1.0 - m) * g[k];
      rbf += m * rb;
      rbb += (1.0 - m) * rb;
      wf += m;
      wb += 1.0 - m;
      const double mm = m * mask.at(y, W - 1 - x);
      if (mm > 0.0) {
        asym += mm * std::abs(g[k] - g[static_cast<std::size_t>(y) * W + (W - 1 - x)]);
        asym_w += mm;
      }
    }
  e.value[0] = asym_w > 0 ? asym / asym_w / 10.0 : 0.0;
  if (wf > 0 && wb > 0) {
    e.value[1] = 3.0 * std::log((yf / wf + 1.0) / (yb / wb + 1.0));
    e.value[3] = (rbf / wf - rbb / wb) / 30.0;
  }
  const double v = laplacian_variance(img, boundary_band(mask));
  e.value[2] = std::log1p(kBlurReferenceVariance) - std::log1p(v);
  return e;
}

std::vector<std::array<double, 4>> default_gains(int n_layers) {
  std::vector<std::array<double, 4>> g(n_layers, {0.5, 0.5, 0.5, 0.5});
  if (n_layers >= 1) g[0] = {0.3, 0.3, 0.3, 0.3};
  // Tuned layers: L2 lighting, L3 warp, L4 blur, L5 color (clamped to depth).
  const std::array<std::pair<int, int>, 4> tuned = {
      {{1, 1}, {2, 0}, {3, 2}, {4, 3}}};
  for (auto [layer, kind] : tuned)
    g[std::min(layer, n_layers - 1)][kind] = 4.0;
  if (n_layers >= 2) {
    auto& last = g[n_layers - 1];
    for (double& v : last) v = std::max(v, 1.5);
  }
  return g;
}

int tuned_layer(const std::vector<std::array<double, 4>>& gains, ArtifactKind kind) {
  const int k = kind_index(kind);
  int best = 0;
  for (int i = 1; i < static_cast<int>(gains.size()); ++i)
    if (gains[i][k] > gains[best][k]) best = i;
  return best;
}

ToyEncoder::ToyEncoder(ToyEncoderConfig config) : config_(std::move(config)) {
  const int L = n_layers();
  if (L < 1) throw ArgumentError("toy encoder needs at least one layer");
  for (int w : config_.layer_widths)
    if (w < 8) throw ArgumentError("toy encoder layer widths must be >= 8");
  gains_ = config_.gains.empty() ? default_gains(L) : config_.gains;
  if (static_cast<int>(gains_.size()) != L)
    throw ArgumentError("gains must have one row per layer");
  for (const auto& row : gains_)
    for (double g : row)
      if (!(g >= 0.0)) throw ArgumentError("planted gains must be non-negative");

  std::mt19937_64 rng(config_.seed);
  layers_.resize(L);
  for (int i = 0; i < L; ++i) {
    const int D = config_.layer_widths[i];
    Layer& layer = layers_[i];
    const double sd = config_.mix_scale / std::sqrt(static_cast<double>(D));
    layer.attn_mix = gaussian_matrix(rng, D, kStatCount, sd);
    layer.mlp_mix = gaussian_matrix(rng, D, kStatCount, sd);

    layer.proj_perm.resize(D);
    std::iota(layer.proj_perm.begin(), layer.proj_perm.end(), 0);
    std::shuffle(layer.proj_perm.begin(), layer.proj_perm.end(), rng);
    layer.proj_sign.resize(D);
    for (int j = 0; j < D; ++j) layer.proj_sign[j] = (rng() & 1) ? 1.0 : -1.0;

    if (i > 0) {
      const int prev = config_.layer_widths[i - 1];
      layer.carry_index.resize(D);
      layer.carry_sign.resize(D);
      std::vector<int> order(prev);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int j = 0; j < D; ++j) {
        layer.carry_index[j] = order[j % prev];
        layer.carry_sign[j] = (rng() & 1) ? 1.0 : -1.0;
      }
      // Each previous unit feeds ceil(D/prev) outputs; keep the map near
      // norm-preserving.
      layer.carry_scale =
          std::sqrt(static_cast<double>(prev) / std::max(D, prev));
    }

    // Gram-Schmidt over four Gaussian draws gives orthonormal planted
    // directions within a layer.
    Eigen::MatrixXd raw = gaussian_matrix(rng, D, 4, 1.0);
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXd u = raw.col(k);
      for (int j = 0; j < k; ++j) u -= u.dot(layer.planted[j]) * layer.planted[j];
      layer.planted[k] = u.normalized();
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(config_.layer_widths.back());
  for (int k = 0; k < 4; ++k) w += layers_.back().planted[k];
  logit_w_ = config_.logit_scale * w.normalized();
  default_mask_ = default_face_mask(224, 224, config_.feather_px);
}

const Eigen::VectorXd& ToyEncoder::planted_direction(int layer, ArtifactKind kind) const {
  if (layer < 0 || layer >= n_layers()) throw ArgumentError("layer index out of range");
  return layers_[layer].planted[kind_index(kind)];
}

void ToyEncoder::apply_hooks(int layer, Sublayer sub, Eigen::VectorXd& out,
                             const std::vector<InterventionHook>& hooks) const {
  for (const auto& h : hooks) {
    if (h.layer != layer || h.sublayer != sub) continue;
    switch (h.mode) {
      case InterventionHook::Mode::zero_ablate:
        out.setZero();
        break;
      case InterventionHook::Mode::add_vector:
        out += h.alpha * h.vector;
        break;
      case InterventionHook::Mode::replace:
        out = h.vector;
        break;
    }
  }
}

EncodeResult ToyEncoder::encode(const Image& img,
                                const std::vector<InterventionHook>& hooks) const {
  return forward(img, hooks, nullptr);
}

Eigen::VectorXd ToyEncoder::sublayer_output(const Image& img, int layer, Sublayer sub) const {
  if (layer < 0 || layer >= n_layers()) throw ArgumentError("layer index out of range");
  Capture capture{layer, sub, {}};
  forward(img, {}, &capture);
  return capture.value;
}

EncodeResult ToyEncoder::forward(const Image& img, const std::vector<InterventionHook>& hooks,
                                 Capture* capture) const {
  check_image(img);
  for (const auto& h : hooks) {
    if (h.layer < 0 || h.layer >= n_layers())
      throw ArgumentError("hook targets nonexistent layer " + std::to_string(h.layer));
    if (h.mode != InterventionHook::Mode::zero_ablate &&
        h.vector.size() != width(h.layer))
      throw ArgumentError("hook vector width does not match layer " +
                          std::to_string(h.layer));
  }

  const bool default_size = img.height() == 224 && img.width() == 224;
  const RegionMask mask =
      default_size ? default_mask_
                   : default_face_mask(img.height(), img.width(), config_.feather_px);
  const Eigen::VectorXd s =
      pooled_statistics(img) - Eigen::VectorXd::Constant(kStatCount, 0.5);
  const ArtifactEnergies energy = artifact_energies(img, mask);

  auto emit = [&](int layer, Sublayer sub, Eigen::VectorXd& out) {
    apply_hooks(layer, sub, out, hooks);
    if (capture && capture->layer == layer && capture->sublayer == sub) capture->value = out;
  };

  EncodeResult result;
  result.layers.reserve(n_layers());
  for (int i = 0; i < n_layers(); ++i) {
    const Layer& layer = layers_[i];
    const int D = width(i);

    Eigen::VectorXd attn = layer.attn_mix * s;
    if (i > 0) {
      const Eigen::VectorXd& prev = result.layers[i - 1];
      for (int j = 0; j < D; ++j)
        attn[j] += config_.carry_gain * layer.carry_scale * layer.carry_sign[j] *
                   prev[layer.carry_index[j]];
    }
    emit(i, Sublayer::attn, attn);

    Eigen::VectorXd proj(D);
    for (int j = 0; j < D; ++j) proj[j] = layer.proj_sign[j] * attn[layer.proj_perm[j]];
    emit(i, Sublayer::attn_proj, proj);

    Eigen::VectorXd mlp = 0.5 * (layer.mlp_mix * s);
    for (int k = 0; k < 4; ++k) mlp += gains_[i][k] * energy.value[k] * layer.planted[k];
    emit(i, Sublayer::mlp, mlp);

    result.layers.push_back(proj + mlp);
  }
  result.logit = logit_w_.dot(result.layers.back()) + config_.logit_bias;
  return result;
}

SyntheticCodes generate_synthetic_codes(int n, int dim, int n_atoms, int k_active,
                                        std::uint64_t seed, double noise_sigma) {
  if (n < 1 || dim < 1 || n_atoms < 1)
    throw ArgumentError("synthetic codes need N, D, d >= 1");
  if (k_active < 0 || k_active > n_atoms || n_atoms > dim)
    throw ArgumentError("synthetic codes need 0 <= k_active <= d <= D");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("noise sigma must be non-negative");

  std::mt19937_64 rng(seed);
  SyntheticCodes out;
  out.dictionary = gaussian_matrix(rng, n_atoms, dim, 1.0);
  for (int a = 0; a < n_atoms; ++a) out.dictionary.row(a).normalize();

  out.coefficients = Eigen::MatrixXd::Zero(n, n_atoms);
  std::vector<int> atoms(n_atoms);
  std::uniform_real_distribution<double> coef(1.0, 3.0);
  for (int r = 0; r < n; ++r) {
    std::iota(atoms.begin(), atoms.end(), 0);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (int j = 0; j < k_active; ++j) {
      std::uniform_int_distribution<int> pick(j, n_atoms - 1);
      std::swap(atoms[j], atoms[pick(rng)]);
      out.coefficients(r, atoms[j]) = coef(rng);
    }
  }
  std::normal_distribution<double> noise(0.0, noise_sigma);
  out.data = out.coefficients * out.dictionary;
  if (noise_sigma > 0.0)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < dim; ++c) out.data(r, c) += noise(rng);
  return out;
}

}  // namespace fm
