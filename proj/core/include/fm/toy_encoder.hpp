#pragma once

// Deterministic stand-in for a vision encoder with planted, known structure.
//
// Every layer i is a sum of two sublayer outputs:
//
//   attn_i      = A_i (s - 1/2) + c Q_i a_{i-1}        (c = carry_gain)
//   attn.proj_i = P_i attn_i                            (signed permutation)
//   mlp_i       = 1/2 B_i (s - 1/2) + sum_k gain_{i,k} E_k(img) u_{i,k}
//   a_i         = attn.proj_i + mlp_i
//
// where s holds 67 pooled image statistics (8x8 average-pooled luma plus
// the three channel means, all scaled to [0,1]), E_k are closed-form
// artifact-energy estimators and u_{i,k} are orthonormal planted
// directions. The logit head reads only the final layer:
// logit = w . a_L + bias with w along the normalised sum of u_{L,k}.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fm/activation_store.hpp"
#include "fm/encoder.hpp"
#include "fm/image.hpp"

namespace fm {

// Index into per-kind arrays: warp, lighting, blur, color.
int kind_index(ArtifactKind kind);

struct ArtifactEnergies {
  // warp: mirror asymmetry of face luma / 10
  // lighting: 3 ln((Y_face + 1) / (Y_background + 1))
  // blur: ln(1 + 2000) - ln(1 + seam Laplacian variance)
  // color: ((R - B)_face - (R - B)_background) / 30
  std::array<double, 4> value{};
};

ArtifactEnergies artifact_energies(const Image& img, const RegionMask& mask);
Eigen::VectorXd pooled_statistics(const Image& img);

struct ToyEncoderConfig {
  std::uint64_t seed = 7;
  std::vector<int> layer_widths = {128, 256, 512, 1024, 2048};
  double carry_gain = 0.25;
  double mix_scale = 1.0;
  // gains[layer][kind_index]; empty selects the default tuning, in which
  // L2 is tuned to lighting, L3 to warp, L4 to blur and L5 to color.
  std::vector<std::array<double, 4>> gains;
  double logit_scale = 2.0;
  double logit_bias = 0.0;
  double feather_px = 16.0;
};

std::vector<std::array<double, 4>> default_gains(int n_layers);

// Layer that carries the largest planted gain for a kind.
int tuned_layer(const std::vector<std::array<double, 4>>& gains, ArtifactKind kind);

class ToyEncoder final : public InterventionEncoder {
 public:
  explicit ToyEncoder(ToyEncoderConfig config = {});

  int n_layers() const override { return static_cast<int>(config_.layer_widths.size()); }
  int width(int layer) const override { return config_.layer_widths.at(layer); }
  const ToyEncoderConfig& config() const { return config_; }
  const std::vector<std::array<double, 4>>& gains() const { return gains_; }

  const Eigen::VectorXd& planted_direction(int layer, ArtifactKind kind) const;
  const Eigen::VectorXd& logit_weights() const { return logit_w_; }
  double logit_bias() const { return config_.logit_bias; }

  // Throws ArgumentError for hooks targeting a nonexistent layer or
  // carrying a vector of the wrong width.
  EncodeResult encode(const Image& img,
                      const std::vector<InterventionHook>& hooks = {}) const override;

  Eigen::VectorXd sublayer_output(const Image& img, int layer,
                                  Sublayer sub) const override;

 private:
  struct Layer {
    Eigen::MatrixXd attn_mix;               // D x 67
    Eigen::MatrixXd mlp_mix;                // D x 67
    std::vector<int> proj_perm;             // attn.proj signed permutation
    Eigen::VectorXd proj_sign;
    std::vector<int> carry_index;           // index into previous layer
    Eigen::VectorXd carry_sign;
    double carry_scale = 0.0;
    std::array<Eigen::VectorXd, 4> planted; // orthonormal u_{i,k}
  };

  struct Capture {
    int layer;
    Sublayer sublayer;
    Eigen::VectorXd value;
  };

  EncodeResult forward(const Image& img, const std::vector<InterventionHook>& hooks,
                       Capture* capture) const;
  void apply_hooks(int layer, Sublayer sub, Eigen::VectorXd& out,
                   const std::vector<InterventionHook>& hooks) const;

  ToyEncoderConfig config_;
  std::vector<std::array<double, 4>> gains_;
  std::vector<Layer> layers_;
  Eigen::VectorXd logit_w_;
  RegionMask default_mask_;  // 224x224; other sizes build a mask per call
};

// Rows are nonnegative k-sparse combinations of d unit-norm atoms in D
// dimensions plus isotropic Gaussian noise. Active coefficients are drawn
// uniformly from [1, 3].
struct SyntheticCodes {
  Eigen::MatrixXd data;          // N x D
  Eigen::MatrixXd dictionary;    // d x D, one atom per row
  Eigen::MatrixXd coefficients;  // N x d
};

SyntheticCodes generate_synthetic_codes(int n, int dim, int n_atoms, int k_active,
                                        std::uint64_t seed, double noise_sigma = 0.01);

}  // namespace fm
