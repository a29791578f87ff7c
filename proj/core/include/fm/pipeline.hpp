#pragma once

// Staged orchestration: importance probe (1), activation extraction and SAE
// training (2), manifold metrics per artifact kind (2b), steering curves
// (3) and the completion flag (4).
//
// Output layout under output_dir:
//   report.json                  every stage present on disk
//   stages/<stage>.json          one file per finished stage
//   acts/<split>/<layer_id>/     activation sets (toy mode; split is
//                                train, eval or sweep)
//   sae/<layer_id>/              SAE checkpoints
//   *.csv, plots/*.svg

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fm/artifact_forge.hpp"
#include "fm/interventions.hpp"
#include "fm/manifold.hpp"
#include "fm/report.hpp"
#include "fm/sae.hpp"
#include "fm/toy_encoder.hpp"

namespace fm {

struct SweepConfig {
  int levels = 8;
  double p_max = 0.7;
  double max_blur_radius_px = kDefaultMaxBlurRadiusPx;
  int n_real = 5;
  int n_fake = 5;
  double feather_px = kDefaultFeatherPx;
};

struct Stage1Config {
  int n_samples = 32;
  AblationMode ablation = AblationMode::zero;
};

struct ManifoldConfig {
  double tau = kDefaultVarianceThreshold;
  DimensionSource dimension_source = DimensionSource::trajectory;
};

struct SteeringConfig {
  std::string layer = "L5";
  std::vector<double> alphas = kDefaultAlphas;
};

struct RunConfig {
  // "toy" or a directory of activation dumps laid out as
  // <dump_dir>/<split>/<layer_id>/.
  std::optional<std::filesystem::path> dump_dir;
  std::string run_id = "toy";
  int n_real = 250;
  int n_fake = 250;
  int n_eval_real = 100;
  int n_eval_fake = 100;
  SweepConfig sweep;
  std::vector<std::string> layers = {"L1", "L2", "L3", "L4", "L5"};
  Stage1Config stage1;
  TrainConfig sae;
  EncoderActivation sae_activation = EncoderActivation::identity;
  ManifoldConfig manifold;
  SteeringConfig steering;
  ToyEncoderConfig toy;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  bool toy_mode() const { return !dump_dir.has_value(); }
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// Experiment parameters only; output_dir is not echoed so runs written to
// different places produce identical reports.
nlohmann::ordered_json config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

enum class Stage { s1, s2, s2b, s3, all };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

struct StageResult {
  RunReport report;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> plots;
};

// Runs one stage (or all of them), then rewrites report.json from every
// stage file on disk and re-emits plots. Throws OrderingError naming the
// missing stage when a prerequisite has not been run.
StageResult run_stage(const RunConfig& config, Stage stage);

// Reads report.json back; throws ValidationError when it violates the schema.
RunReport load_report(const std::filesystem::path& path);

// Image sets of the toy world.
struct LabelledImages {
  std::vector<Image> images;
  SampleManifest manifest;
};
LabelledImages toy_split(const RunConfig& config, std::string_view split);
LabelledImages toy_sweep(const RunConfig& config);

// Encodes every image and returns one activation set per requested layer.
std::vector<ActivationSet> encode_layers(const InterventionEncoder& encoder,
                                         const std::vector<Image>& images,
                                         const std::vector<std::string>& layers);

}  // namespace fm
