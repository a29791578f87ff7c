#pragma once

// RunReport: the structured output of a pipeline run and its JSON form.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fm/activation_store.hpp"
#include "fm/interventions.hpp"
#include "fm/sae.hpp"

namespace fm {

inline constexpr const char* kReportSchemaVersion = "1";

struct Stage1Report {
  std::string ablation = "zero";
  int n_samples = 0;
  std::vector<ImportanceScore> scores;

  bool operator==(const Stage1Report&) const = default;
};

struct LayerSaeReport {
  std::string layer_id;
  int input_dim = 0;
  int latent_dim = 0;
  int n_train = 0;
  int n_val = 0;
  double relative_reconstruction_error = 0.0;
  double mean_sparsity = 0.0;
  double mean_activity_ratio = 0.0;
  double mean_activation_frequency = 0.0;
  int active_feature_count = 0;
  double mean_selectivity = 0.0;        // over the four artifact kinds
  std::vector<double> latent_rho;       // signed, averaged over kinds
  TrainingTrace trace;
};

struct Stage2Report {
  std::vector<LayerSaeReport> layers;
  // Means over layers.
  double mean_sparsity = 0.0;
  double mean_activity_ratio = 0.0;
  double mean_selectivity = 0.0;
  int active_feature_count = 0;  // summed over layers
};

struct ManifoldLayerEntry {
  std::string layer_id;
  int intrinsic_dim = 1;
  double curvature = 0.0;
  double selectivity = 0.0;
  double shuffled_selectivity = 0.0;  // severity-permuted control
  double tau = 0.95;
  std::vector<double> eigenvalues;
};

struct ManifoldEntry {
  ArtifactKind artifact_kind = ArtifactKind::warp;
  std::vector<ManifoldLayerEntry> layers;
  double mean_intrinsic_dim = 0.0;
  double mean_curvature = 0.0;
  double mean_selectivity = 0.0;
};

struct SteeringCurveReport {
  std::string vector_id;
  std::string construction;
  int top_k = 0;
  std::string layer_id;
  double baseline_accuracy = 0.0;
  std::vector<double> alphas;
  std::vector<double> accuracy;
};

struct RunReport {
  std::string schema_version = kReportSchemaVersion;
  std::string created_at;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::optional<Stage1Report> stage1;
  std::optional<Stage2Report> stage2;
  std::optional<std::vector<ManifoldEntry>> stage2b;
  std::optional<std::vector<SteeringCurveReport>> stage3;
  std::optional<bool> stage4_completed;
};

nlohmann::ordered_json to_json(const Stage1Report& s);
Stage1Report stage1_from_json(const nlohmann::json& j);

nlohmann::ordered_json report_to_json(const RunReport& report);
// Validates against the shipped schema first; throws ValidationError.
RunReport report_from_json(const nlohmann::json& j);

// Pretty-printed JSON with a trailing newline.
std::string dump_report(const RunReport& report);

// The report schema shipped with the library.
const nlohmann::json& report_schema();
void validate_report_json(const nlohmann::json& j);

}  // namespace fm
