#include "fm/interventions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fm/error.hpp"

namespace fm {

namespace {

void check_target(const InterventionEncoder& enc, int block) {
  if (block < 0 || block >= enc.n_layers())
    throw ArgumentError("intervention target block " + std::to_string(block) +
                        " does not exist");
}

void check_labels(Eigen::Index rows, const std::vector<Authenticity>& labels) {
  if (rows == 0) throw ArgumentError("empty code matrix");
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw ArgumentError("label count does not match code rows");
  const bool has_real = std::find(labels.begin(), labels.end(), Authenticity::real) != labels.end();
  const bool has_fake = std::find(labels.begin(), labels.end(), Authenticity::fake) != labels.end();
  if (!has_real || !has_fake) throw ArgumentError("both real and fake samples are required");
}

// Indices of the k largest |rho|, lower index first on ties.
std::vector<Eigen::Index> top_by_magnitude(const Eigen::VectorXd& rho, int k) {
  std::vector<Eigen::Index> idx(rho.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(rho[a]) > std::abs(rho[b]);
  });
  idx.resize(k);
  return idx;
}

Eigen::VectorXd masked(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& keep) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (auto i : keep) out[i] = v[i];
  return out;
}

}  // namespace

std::string_view to_string(AblationMode m) {
  return m == AblationMode::zero ? "zero" : "mean";
}

AblationMode parse_ablation_mode(std::string_view s) {
  if (s == "zero") return AblationMode::zero;
  if (s == "mean") return AblationMode::mean;
  throw ConfigError("unknown ablation mode '" + std::string(s) + "'");
}

ImportanceScore layer_importance(const InterventionEncoder& enc, const std::vector<Image>& samples,
                                 int block, Sublayer sub, AblationMode mode) {
  check_target(enc, block);
  if (samples.empty()) throw ArgumentError("importance needs at least one sample");

  InterventionHook hook = InterventionHook::zero(block, sub);
  if (mode == AblationMode::mean) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(enc.width(block));
    for (const auto& img : samples) mean += enc.sublayer_output(img, block, sub);
    mean /= static_cast<double>(samples.size());
    hook = InterventionHook::replace_with(block, sub, std::move(mean));
  }
  const std::vector<InterventionHook> hooks{hook};

  double sum = 0.0;
  for (const auto& img : samples) {
    const double clean = enc.encode(img, {}).logit;
    const double ablated = enc.encode(img, hooks).logit;
    sum += std::abs(clean - ablated);
  }
  return {block, sub, sum / static_cast<double>(samples.size())};
}

std::vector<ImportanceScore> importance_table(const InterventionEncoder& enc,
                                              const std::vector<Image>& samples,
                                              AblationMode mode) {
  std::vector<ImportanceScore> out;
  for (int b = 0; b < enc.n_layers(); ++b)
    for (Sublayer s : kSublayers) out.push_back(layer_importance(enc, samples, b, s, mode));
  return out;
}

std::string_view to_string(SteeringConstruction c) {
  return c == SteeringConstruction::class_mean_diff ? "class_mean_diff" : "top_selectivity";
}

SteeringConstruction parse_steering_construction(std::string_view s) {
  if (s == "class_mean_diff") return SteeringConstruction::class_mean_diff;
  if (s == "top_selectivity") return SteeringConstruction::top_selectivity;
  throw ConfigError("unknown steering construction '" + std::string(s) + "'");
}

std::string SteeringVector::id() const {
  std::string s(to_string(construction));
  return top_k > 0 ? s + "_k" + std::to_string(top_k) : s;
}

SteeringVector steering_vector(const Eigen::MatrixXd& codes, const std::vector<Authenticity>& labels,
                               const std::optional<Eigen::VectorXd>& rho,
                               SteeringConstruction construction, int top_k) {
  check_labels(codes.rows(), labels);
  const auto d = codes.cols();
  if (rho && rho->size() != d) throw ArgumentError("rho length does not match code width");
  const bool uses_mask = rho.has_value();
  if (construction == SteeringConstruction::top_selectivity && !uses_mask)
    throw ArgumentError("top_selectivity steering requires rho");
  if (uses_mask && (top_k < 1 || top_k > d))
    throw ArgumentError("top_k must lie in [1, d]");

  Eigen::VectorXd v;
  if (construction == SteeringConstruction::class_mean_diff) {
    Eigen::VectorXd fake = Eigen::VectorXd::Zero(d), real = Eigen::VectorXd::Zero(d);
    int n_fake = 0, n_real = 0;
    for (Eigen::Index i = 0; i < codes.rows(); ++i) {
      if (labels[i] == Authenticity::fake) {
        fake += codes.row(i).transpose();
        ++n_fake;
      } else {
        real += codes.row(i).transpose();
        ++n_real;
      }
    }
    v = fake / n_fake - real / n_real;
    if (uses_mask) v = masked(v, top_by_magnitude(*rho, top_k));
  } else {
    v = masked(*rho, top_by_magnitude(*rho, top_k));
  }

  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw DegenerateError("steering direction is zero");
  return {v / norm, construction, uses_mask ? top_k : 0};
}

Eigen::VectorXd apply_steering(const Eigen::VectorXd& h, const SteeringVector& v, double alpha) {
  if (h.size() != v.v.size()) throw ArgumentError("steering vector width does not match code");
  return h + alpha * v.v;
}

LogisticHead LogisticHead::fit(const Eigen::MatrixXd& codes, const std::vector<Authenticity>& labels,
                               int steps, double lr) {
  check_labels(codes.rows(), labels);
  const auto n = codes.rows();
  const auto d = codes.cols();
  LogisticHead head;
  head.mean_ = codes.colwise().mean().transpose();
  head.inv_scale_.resize(d);
  const double width_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt((codes.col(j).array() - head.mean_[j]).square().mean());
    head.inv_scale_[j] = sd > 0.0 ? width_scale / sd : 0.0;
  }
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = head.transform(codes.row(i).transpose()).transpose();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i] == Authenticity::fake ? 1.0 : 0.0;

  head.w_ = Eigen::VectorXd::Zero(d);
  head.b_ = 0.0;
  for (int step = 0; step < steps; ++step) {
    Eigen::VectorXd z = (x * head.w_).array() + head.b_;
    Eigen::VectorXd r = (1.0 / (1.0 + (-z.array()).exp())).matrix() - y;
    head.w_ -= lr * (x.transpose() * r) / static_cast<double>(n);
    head.b_ -= lr * r.mean();
  }
  return head;
}

Eigen::VectorXd LogisticHead::transform(const Eigen::VectorXd& h) const {
  if (h.size() != mean_.size()) throw ArgumentError("code width does not match classifier");
  return ((h - mean_).array() * inv_scale_.array()).matrix();
}

double LogisticHead::decision(const Eigen::VectorXd& h) const {
  return w_.dot(transform(h)) + b_;
}

Authenticity LogisticHead::predict(const Eigen::VectorXd& h) const {
  return decision(h) > 0.0 ? Authenticity::fake : Authenticity::real;
}

double LogisticHead::accuracy(const Eigen::MatrixXd& codes,
                              const std::vector<Authenticity>& labels) const {
  if (codes.rows() == 0) throw ArgumentError("empty evaluation set");
  if (static_cast<Eigen::Index>(labels.size()) != codes.rows())
    throw ArgumentError("label count does not match code rows");
  int correct = 0;
  for (Eigen::Index i = 0; i < codes.rows(); ++i)
    correct += predict(codes.row(i).transpose()) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(codes.rows());
}

SteeringCurve steering_curve(const LogisticHead& head, const Eigen::MatrixXd& eval_codes,
                             const std::vector<Authenticity>& eval_labels,
                             const SteeringVector& v, const std::vector<double>& alphas) {
  check_labels(eval_codes.rows(), eval_labels);
  if (v.v.size() != eval_codes.cols())
    throw ArgumentError("steering vector width does not match codes");
  SteeringCurve curve;
  curve.vector_id = v.id();
  curve.alphas = alphas;
  const auto n = eval_codes.rows();
  for (double alpha : alphas) {
    int correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd h = eval_codes.row(i).transpose();
      if (eval_labels[i] == Authenticity::fake) h = apply_steering(h, v, alpha);
      correct += head.predict(h) == eval_labels[i];
    }
    curve.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
  }
  return curve;
}

}  // namespace fm
