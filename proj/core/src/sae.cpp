#include "fm/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

#include "fm/error.hpp"
#include "fm/npy.hpp"

namespace fm {
namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, int rows, int cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = bound * (2.0 * unit_uniform(rng) - 1.0);
  return m;
}

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_batch(const SparseAutoencoder& sae, const Eigen::MatrixXd& batch) {
  if (batch.rows() < 1) throw ArgumentError("batch must be nonempty");
  if (batch.cols() != sae.input_dim())
    throw ArgumentError("batch width " + std::to_string(batch.cols()) +
                        " does not match SAE input width " +
                        std::to_string(sae.input_dim()));
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows,
                            std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(i - begin) = x.row(rows[i]);
  return out;
}

struct AdamMoments {
  SaeGradients m, v;
  explicit AdamMoments(const SparseAutoencoder& sae) {
    for (auto* g : {&m, &v}) {
      g->w_enc = Eigen::MatrixXd::Zero(sae.w_enc.rows(), sae.w_enc.cols());
      g->b_enc = Eigen::VectorXd::Zero(sae.b_enc.size());
      g->w_dec = Eigen::MatrixXd::Zero(sae.w_dec.rows(), sae.w_dec.cols());
      g->b_dec = Eigen::VectorXd::Zero(sae.b_dec.size());
    }
  }
};

template <typename P>
void adam_update(P& param, const P& grad, P& m, P& v, const TrainConfig& cfg,
                 double bias1, double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= cfg.lr * (m.array() / bias1) /
                   ((v.array() / bias2).sqrt() + cfg.adam_eps);
}

}  // namespace

std::string_view to_string(EncoderActivation a) {
  return a == EncoderActivation::relu ? "relu" : "identity";
}

EncoderActivation parse_encoder_activation(std::string_view s) {
  if (s == "identity") return EncoderActivation::identity;
  if (s == "relu") return EncoderActivation::relu;
  throw ConfigError("unknown encoder activation '" + std::string(s) + "'");
}

int latent_width_for(int input_dim) {
  if (input_dim < 8) throw ArgumentError("SAE input width must be >= 8");
  return std::min(input_dim / 8, kMaxLatentWidth);
}

Eigen::VectorXd SparseAutoencoder::encode(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ArgumentError("encode: input width mismatch");
  Eigen::VectorXd h = w_enc * x + b_enc;
  if (activation == EncoderActivation::relu) h = h.cwiseMax(0.0);
  return h;
}

Eigen::VectorXd SparseAutoencoder::decode(const Eigen::VectorXd& h) const {
  if (h.size() != latent_dim()) throw ArgumentError("decode: latent width mismatch");
  return w_dec * h + b_dec;
}

Eigen::MatrixXd SparseAutoencoder::encode_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) throw ArgumentError("encode: input width mismatch");
  Eigen::MatrixXd h = (x * w_enc.transpose()).rowwise() + b_enc.transpose();
  if (activation == EncoderActivation::relu) h = h.cwiseMax(0.0);
  return h;
}

Eigen::MatrixXd SparseAutoencoder::decode_rows(const Eigen::MatrixXd& h) const {
  if (h.cols() != latent_dim()) throw ArgumentError("decode: latent width mismatch");
  return (h * w_dec.transpose()).rowwise() + b_dec.transpose();
}

void SparseAutoencoder::check() const {
  const auto d = w_enc.rows(), D = w_enc.cols();
  if (d < 1 || D < 1 || b_enc.size() != d || w_dec.rows() != D || w_dec.cols() != d ||
      b_dec.size() != D)
    throw ArgumentError("inconsistent SAE parameter shapes");
  if (d > D) throw ArgumentError("SAE latent width exceeds input width");
  if (!w_enc.allFinite() || !b_enc.allFinite() || !w_dec.allFinite() || !b_dec.allFinite())
    throw DataError("SAE weights contain non-finite values");
}

SparseAutoencoder init_sae(int input_dim, std::uint64_t seed, EncoderActivation activation) {
  const int d = latent_width_for(input_dim);
  std::mt19937_64 rng(seed);
  SparseAutoencoder sae;
  sae.activation = activation;
  sae.w_enc = uniform_matrix(rng, d, input_dim, 1.0 / std::sqrt(double(input_dim)));
  sae.w_dec = uniform_matrix(rng, input_dim, d, 1.0 / std::sqrt(double(d)));
  sae.b_enc = Eigen::VectorXd::Zero(d);
  sae.b_dec = Eigen::VectorXd::Zero(input_dim);
  return sae;
}

LossTerms sae_loss(const SparseAutoencoder& sae, const Eigen::MatrixXd& batch,
                   double lambda) {
  check_batch(sae, batch);
  const double n = static_cast<double>(batch.rows());
  const Eigen::MatrixXd h = sae.encode_rows(batch);
  const Eigen::MatrixXd err = sae.decode_rows(h) - batch;
  LossTerms t;
  t.recon = err.squaredNorm() / n;
  t.penalty = lambda * h.cwiseAbs().sum() / n;
  t.total = t.recon + t.penalty;
  return t;
}

LossTerms sae_loss_and_gradients(const SparseAutoencoder& sae, const Eigen::MatrixXd& batch,
                                 double lambda, SaeGradients& g) {
  check_batch(sae, batch);
  const double n = static_cast<double>(batch.rows());
  const Eigen::MatrixXd h = sae.encode_rows(batch);
  const Eigen::MatrixXd err = sae.decode_rows(h) - batch;

  LossTerms t;
  t.recon = err.squaredNorm() / n;
  t.penalty = lambda * h.cwiseAbs().sum() / n;
  t.total = t.recon + t.penalty;

  const Eigen::MatrixXd d_out = (2.0 / n) * err;  // n x D
  g.w_dec = d_out.transpose() * h;
  g.b_dec = d_out.colwise().sum().transpose();
  Eigen::MatrixXd d_h = d_out * sae.w_dec + (lambda / n) * h.unaryExpr(&sign0);  // n x d
  if (sae.activation == EncoderActivation::relu)
    d_h = d_h.cwiseProduct((h.array() > 0.0).cast<double>().matrix());
  g.w_enc = d_h.transpose() * batch;
  g.b_enc = d_h.colwise().sum().transpose();
  return t;
}

void validate(const TrainConfig& c) {
  if (!(c.lambda >= 0.0)) throw ConfigError("sae.lambda must be non-negative");
  if (!(c.lr > 0.0)) throw ConfigError("sae.lr must be positive");
  if (c.max_epochs < 1) throw ConfigError("sae.max_epochs must be >= 1");
  if (c.patience < 1) throw ConfigError("sae.patience must be >= 1");
  if (c.batch_size < 1) throw ConfigError("sae.batch_size must be >= 1");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0))
    throw ConfigError("sae.val_fraction must lie in (0,1)");
  if (!(c.eps_active > 0.0)) throw ConfigError("sae.eps_active must be positive");
}

EarlyStopping::EarlyStopping(int patience, double initial_best, bool has_initial)
    : patience_(patience), best_(initial_best), has_best_(has_initial) {}

bool EarlyStopping::update(double val_loss) {
  ++epochs_;
  improved_last_ = !has_best_ || val_loss < best_;
  if (improved_last_) {
    best_ = val_loss;
    has_best_ = true;
    best_epoch_ = epochs_;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

int epochs_until_stop(const std::vector<double>& val_losses, int patience, int max_epochs) {
  EarlyStopping stop(patience);
  int run = 0;
  for (double v : val_losses) {
    if (run >= max_epochs) break;
    ++run;
    if (stop.update(v)) break;
  }
  return run;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (!enabled()) return x;
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

TrainResult train_sae(SparseAutoencoder init, const Eigen::MatrixXd& raw,
                      const TrainConfig& cfg) {
  validate(cfg);
  init.check();
  if (raw.rows() < 10)
    throw DataError("SAE training needs at least 10 rows, got " + std::to_string(raw.rows()));
  if (raw.cols() != init.input_dim()) throw ArgumentError("training data width mismatch");
  if (!raw.allFinite()) throw DataError("training data contains non-finite values");

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(raw.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.val_fraction * raw.rows())), 1,
      order.size() - 1);
  result.val_rows.assign(order.begin(), order.begin() + n_val);
  result.train_rows.assign(order.begin() + n_val, order.end());
  std::sort(result.val_rows.begin(), result.val_rows.end());
  std::sort(result.train_rows.begin(), result.train_rows.end());

  Eigen::MatrixXd train = gather_rows(raw, result.train_rows, 0, result.train_rows.size());
  Eigen::MatrixXd val = gather_rows(raw, result.val_rows, 0, result.val_rows.size());
  if (cfg.standardize) {
    Standardizer& s = result.standardizer;
    s.mean = train.colwise().mean();
    s.scale = ((train.rowwise() - s.mean).array().square().colwise().sum() /
               std::max<double>(1.0, train.rows() - 1.0))
                  .sqrt()
                  .matrix();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
      if (!(s.scale[j] > 0.0)) s.scale[j] = 1.0;
    train = s.apply(train);
    val = s.apply(val);
  }

  SparseAutoencoder sae = std::move(init);
  SparseAutoencoder best = sae;
  AdamMoments moments(sae);
  SaeGradients grads;
  long step = 0;

  TrainingTrace& trace = result.trace;
  trace.initial_total_loss = sae_loss(sae, train, cfg.lambda).total;
  trace.initial_val_loss = sae_loss(sae, val, cfg.lambda).total;
  EarlyStopping stopper(cfg.patience, trace.initial_val_loss, true);

  std::vector<int> batch_order(train.rows());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    for (std::size_t b = 0; b < batch_order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(batch_order.size(), b + cfg.batch_size);
      const Eigen::MatrixXd batch = gather_rows(train, batch_order, b, e);
      sae_loss_and_gradients(sae, batch, cfg.lambda, grads);
      ++step;
      const double bias1 = 1.0 - std::pow(cfg.beta1, double(step));
      const double bias2 = 1.0 - std::pow(cfg.beta2, double(step));
      adam_update(sae.w_enc, grads.w_enc, moments.m.w_enc, moments.v.w_enc, cfg, bias1, bias2);
      adam_update(sae.b_enc, grads.b_enc, moments.m.b_enc, moments.v.b_enc, cfg, bias1, bias2);
      adam_update(sae.w_dec, grads.w_dec, moments.m.w_dec, moments.v.w_dec, cfg, bias1, bias2);
      adam_update(sae.b_dec, grads.b_dec, moments.m.b_dec, moments.v.b_dec, cfg, bias1, bias2);
    }
    if (!sae.w_enc.allFinite() || !sae.w_dec.allFinite())
      throw DataError("SAE training diverged at epoch " + std::to_string(epoch));

    EpochStats stats;
    const LossTerms tl = sae_loss(sae, train, cfg.lambda);
    stats.total_loss = tl.total;
    stats.recon_loss = tl.recon;
    stats.sparsity_penalty = tl.penalty;
    stats.val_loss = sae_loss(sae, val, cfg.lambda).total;
    stats.mean_activity_ratio =
        per_sample_activity(sae.encode_rows(train), cfg.eps_active).mean_activity_ratio;
    trace.epochs.push_back(stats);

    const bool stop = stopper.update(stats.val_loss);
    if (stopper.improved_last()) {
      best = sae;
      trace.best_epoch = epoch;
    }
    if (stop) {
      trace.early_stopped = epoch < cfg.max_epochs;
      break;
    }
  }
  result.sae = std::move(best);
  return result;
}

TrainResult train_sae(SparseAutoencoder init, const ActivationSet& data,
                      const TrainConfig& config) {
  return train_sae(std::move(init), data.to_double(), config);
}

int active_feature_count(const Eigen::MatrixXd& codes, double eps_active) {
  if (codes.rows() < 1) throw ArgumentError("codes must be nonempty");
  int count = 0;
  for (Eigen::Index j = 0; j < codes.cols(); ++j)
    if (codes.col(j).cwiseAbs().maxCoeff() > eps_active) ++count;
  return count;
}

Eigen::VectorXd activation_frequency(const Eigen::MatrixXd& codes, double eps_active) {
  if (codes.rows() < 1) throw ArgumentError("codes must be nonempty");
  return (codes.array().abs() > eps_active).cast<double>().colwise().mean().transpose();
}

SampleActivity per_sample_activity(const Eigen::MatrixXd& codes, double eps_active) {
  if (codes.rows() < 1 || codes.cols() < 1) throw ArgumentError("codes must be nonempty");
  SampleActivity a;
  a.activity_ratio =
      (codes.array().abs() > eps_active).cast<double>().rowwise().mean().matrix();
  a.mean_activity_ratio = a.activity_ratio.mean();
  a.mean_sparsity = 1.0 - a.mean_activity_ratio;
  return a;
}

double relative_reconstruction_error(const SparseAutoencoder& sae, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd rec = sae.decode_rows(sae.encode_rows(x));
  const double signal = x.squaredNorm();
  if (!(signal > 0.0)) throw DegenerateError("zero signal norm");
  return std::sqrt((rec - x).squaredNorm() / signal);
}

void save_sae(const std::filesystem::path& dir, const SparseAutoencoder& sae,
              const TrainConfig& config) {
  sae.check();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  write_npy(dir / "w_enc.npy", sae.w_enc.cast<float>());
  write_npy(dir / "w_dec.npy", sae.w_dec.cast<float>());
  write_npy(dir / "b_enc.npy", sae.b_enc.transpose().cast<float>());
  write_npy(dir / "b_dec.npy", sae.b_dec.transpose().cast<float>());

  nlohmann::ordered_json j;
  j["format_version"] = "1";
  j["input_dim"] = sae.input_dim();
  j["latent_dim"] = sae.latent_dim();
  j["activation"] = std::string(to_string(sae.activation));
  j["lambda"] = config.lambda;
  j["lr"] = config.lr;
  j["max_epochs"] = config.max_epochs;
  j["patience"] = config.patience;
  j["batch_size"] = config.batch_size;
  j["val_fraction"] = config.val_fraction;
  j["eps_active"] = config.eps_active;
  j["seed"] = config.seed;
  j["standardize"] = config.standardize;
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(dir / "sae.json",
                   {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

SparseAutoencoder load_sae(const std::filesystem::path& dir) {
  const auto bytes = read_file_bytes(dir / "sae.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sae.json is not valid JSON: ") + e.what());
  }
  SparseAutoencoder sae;
  sae.w_enc = read_npy(dir / "w_enc.npy").cast<double>();
  sae.w_dec = read_npy(dir / "w_dec.npy").cast<double>();
  const RowMatrixF b_enc = read_npy(dir / "b_enc.npy");
  const RowMatrixF b_dec = read_npy(dir / "b_dec.npy");
  if (b_enc.rows() != 1 || b_dec.rows() != 1)
    throw ValidationError("bias files must have shape (1, n)");
  sae.b_enc = b_enc.row(0).transpose().cast<double>();
  sae.b_dec = b_dec.row(0).transpose().cast<double>();
  sae.activation = parse_encoder_activation(j.value("activation", std::string("identity")));
  sae.check();
  if (j.value("input_dim", -1) != sae.input_dim() ||
      j.value("latent_dim", -1) != sae.latent_dim())
    throw ValidationError("sae.json dimensions do not match weight files");
  return sae;
}

}  // namespace fm
