#pragma once

// Causal probes over an intervention-capable encoder: ablation importance
// per block sublayer, and steering of SAE latent codes along a direction.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fm/activation_store.hpp"
#include "fm/encoder.hpp"
#include "fm/image.hpp"

namespace fm {

enum class AblationMode { zero, mean };

std::string_view to_string(AblationMode m);
AblationMode parse_ablation_mode(std::string_view s);

struct ImportanceScore {
  int block = 0;
  Sublayer submodule = Sublayer::attn;
  double score = 0.0;

  bool operator==(const ImportanceScore&) const = default;
};

// Mean over samples of |logit(clean) - logit(ablated)|. Mean ablation
// replaces the sublayer output by its average over `samples`.
ImportanceScore layer_importance(const InterventionEncoder& encoder,
                                 const std::vector<Image>& samples, int block,
                                 Sublayer submodule, AblationMode mode = AblationMode::zero);

// Every (block, sublayer) pair in block order.
std::vector<ImportanceScore> importance_table(const InterventionEncoder& encoder,
                                              const std::vector<Image>& samples,
                                              AblationMode mode = AblationMode::zero);

enum class SteeringConstruction { class_mean_diff, top_selectivity };

std::string_view to_string(SteeringConstruction c);
SteeringConstruction parse_steering_construction(std::string_view s);

struct SteeringVector {
  Eigen::VectorXd v;  // unit norm
  SteeringConstruction construction = SteeringConstruction::class_mean_diff;
  int top_k = 0;      // 0 when no coordinate mask was applied
  std::string id() const;
};

// class_mean_diff: mean(h | fake) - mean(h | real), optionally restricted to
// the top_k coordinates by |rho|. top_selectivity: rho restricted to its
// top_k coordinates by |rho|. Ties rank the lower index first.
SteeringVector steering_vector(const Eigen::MatrixXd& codes,
                               const std::vector<Authenticity>& labels,
                               const std::optional<Eigen::VectorXd>& rho,
                               SteeringConstruction construction, int top_k);

Eigen::VectorXd apply_steering(const Eigen::VectorXd& h, const SteeringVector& v, double alpha);

// Logistic real/fake classifier on latent codes (fake = 1). Inputs are
// standardized per column with statistics from the fitting codes and scaled
// by 1/sqrt(d), so a fixed learning rate is stable for any width.
class LogisticHead {
 public:
  static constexpr int kSteps = 200;
  static constexpr double kLearningRate = 0.1;

  static LogisticHead fit(const Eigen::MatrixXd& codes, const std::vector<Authenticity>& labels,
                          int steps = kSteps, double lr = kLearningRate);

  double decision(const Eigen::VectorXd& h) const;
  Authenticity predict(const Eigen::VectorXd& h) const;
  double accuracy(const Eigen::MatrixXd& codes, const std::vector<Authenticity>& labels) const;

  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Eigen::VectorXd transform(const Eigen::VectorXd& h) const;

  Eigen::VectorXd mean_;
  Eigen::VectorXd inv_scale_;
  Eigen::VectorXd w_;
  double b_ = 0.0;
};

inline const std::vector<double> kDefaultAlphas = {-2.0, -1.5, -1.0, -0.5, 0.0,
                                                  0.5,  1.0,  1.5,  2.0};

struct SteeringCurve {
  std::string vector_id;
  std::vector<double> alphas;
  std::vector<double> accuracy;
};

// Fake-labelled rows are shifted by alpha * v before classification; real
// rows are classified unchanged. Throws ArgumentError on an empty or
// single-class eval set.
SteeringCurve steering_curve(const LogisticHead& head, const Eigen::MatrixXd& eval_codes,
                             const std::vector<Authenticity>& eval_labels,
                             const SteeringVector& v,
                             const std::vector<double>& alphas = kDefaultAlphas);

}  // namespace fm
