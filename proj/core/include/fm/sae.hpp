#pragma once

// Under-complete sparse autoencoder trained with
//
//   L = mean_batch ||x - g(f(x))||_2^2 + lambda * mean_batch ||f(x)||_1
//
// f(x) = W_enc x + b_enc (optionally rectified), g(h) = W_dec h + b_dec.
// The L1 subgradient at exactly zero is taken as zero, as is the ReLU
// derivative at zero.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fm/activation_store.hpp"

namespace fm {

inline constexpr int kMaxLatentWidth = 16384;

// d = min(floor(D / 8), 16384). Throws ArgumentError for D < 8.
int latent_width_for(int input_dim);

enum class EncoderActivation { identity, relu };

std::string_view to_string(EncoderActivation a);
EncoderActivation parse_encoder_activation(std::string_view s);

struct SparseAutoencoder {
  EncoderActivation activation = EncoderActivation::identity;
  Eigen::MatrixXd w_enc;  // d x D
  Eigen::VectorXd b_enc;  // d
  Eigen::MatrixXd w_dec;  // D x d
  Eigen::VectorXd b_dec;  // D

  int latent_dim() const { return static_cast<int>(w_enc.rows()); }
  int input_dim() const { return static_cast<int>(w_enc.cols()); }

  Eigen::VectorXd encode(const Eigen::VectorXd& x) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& h) const;
  // Row-wise versions; rows are samples.
  Eigen::MatrixXd encode_rows(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd decode_rows(const Eigen::MatrixXd& h) const;

  // Throws ArgumentError on inconsistent shapes, DataError on non-finite
  // weights.
  void check() const;
};

// Weights ~ U(-1/sqrt(D), 1/sqrt(D)) for the encoder and U(-1/sqrt(d),
// 1/sqrt(d)) for the decoder; biases zero.
SparseAutoencoder init_sae(int input_dim, std::uint64_t seed,
                           EncoderActivation activation = EncoderActivation::identity);

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;
  double penalty = 0.0;
};

struct SaeGradients {
  Eigen::MatrixXd w_enc;
  Eigen::VectorXd b_enc;
  Eigen::MatrixXd w_dec;
  Eigen::VectorXd b_dec;
};

LossTerms sae_loss(const SparseAutoencoder& sae, const Eigen::MatrixXd& batch,
                   double lambda);
LossTerms sae_loss_and_gradients(const SparseAutoencoder& sae,
                                 const Eigen::MatrixXd& batch, double lambda,
                                 SaeGradients& grads);

struct TrainConfig {
  double lambda = 1e-3;
  double lr = 1e-4;
  int max_epochs = 10;
  int patience = 3;
  int batch_size = 64;
  double val_fraction = 0.1;
  double eps_active = 1e-4;
  std::uint64_t seed = 0;
  bool standardize = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Throws ConfigError for non-positive or out-of-range fields.
void validate(const TrainConfig& config);

struct EpochStats {
  double total_loss = 0.0;
  double recon_loss = 0.0;
  double sparsity_penalty = 0.0;
  double val_loss = 0.0;
  double mean_activity_ratio = 0.0;
};

struct TrainingTrace {
  double initial_total_loss = 0.0;
  double initial_val_loss = 0.0;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; 0 when no epoch improved on the init
  bool early_stopped = false;
};

// Tracks validation loss across epochs; stop() turns true once `patience`
// consecutive epochs fail to improve strictly on the best seen so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience, double initial_best = 0.0, bool has_initial = false);

  // Returns true when training should stop after this epoch.
  bool update(double val_loss);
  int best_epoch() const { return best_epoch_; }
  int epochs_seen() const { return epochs_; }
  bool improved_last() const { return improved_last_; }

 private:
  int patience_;
  double best_;
  bool has_best_;
  int best_epoch_ = 0;
  int epochs_ = 0;
  int stale_ = 0;
  bool improved_last_ = false;
};

// Number of epochs that run for a given validation-loss sequence.
int epochs_until_stop(const std::vector<double>& val_losses, int patience, int max_epochs);

// Per-column affine map fitted on training rows; identity when disabled.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  bool enabled() const { return mean.size() > 0; }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct TrainResult {
  SparseAutoencoder sae;
  TrainingTrace trace;
  Standardizer standardizer;
  std::vector<int> train_rows;
  std::vector<int> val_rows;
};

// Throws DataError when fewer than 10 rows are given.
TrainResult train_sae(SparseAutoencoder init, const Eigen::MatrixXd& data,
                      const TrainConfig& config);
TrainResult train_sae(SparseAutoencoder init, const ActivationSet& data,
                      const TrainConfig& config);

// --- latent-code statistics --------------------------------------------------

int active_feature_count(const Eigen::MatrixXd& codes, double eps_active);
Eigen::VectorXd activation_frequency(const Eigen::MatrixXd& codes, double eps_active);

struct SampleActivity {
  Eigen::VectorXd activity_ratio;  // per row: fraction of active latents
  double mean_activity_ratio = 0.0;
  double mean_sparsity = 0.0;      // 1 - mean_activity_ratio
};
SampleActivity per_sample_activity(const Eigen::MatrixXd& codes, double eps_active);

// Relative reconstruction error sqrt(sum ||x - x_hat||^2 / sum ||x||^2).
double relative_reconstruction_error(const SparseAutoencoder& sae, const Eigen::MatrixXd& x);

// --- checkpoints --------------------------------------------------------------

// Writes w_enc.npy, w_dec.npy, b_enc.npy, b_dec.npy (float32 array files)
// and sae.json with the hyperparameters.
void save_sae(const std::filesystem::path& dir, const SparseAutoencoder& sae,
              const TrainConfig& config);
SparseAutoencoder load_sae(const std::filesystem::path& dir);

}  // namespace fm
