#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fm/npy.hpp"

namespace fm {

enum class Authenticity { real, fake };
enum class ArtifactKind { none, warp, lighting, blur, color };

std::string_view to_string(Authenticity a);
std::string_view to_string(ArtifactKind k);
Authenticity parse_authenticity(std::string_view s);
ArtifactKind parse_artifact_kind(std::string_view s);

// The four perturbation kinds in canonical report order.
inline constexpr ArtifactKind kArtifactKinds[] = {
    ArtifactKind::warp, ArtifactKind::lighting, ArtifactKind::blur,
    ArtifactKind::color};

// One layer's activations: rows are samples, columns are units. Immutable
// once constructed; construction rejects empty or non-finite matrices.
class ActivationSet {
 public:
  ActivationSet(std::string layer_id, RowMatrixF data);

  const std::string& layer_id() const { return layer_id_; }
  const RowMatrixF& data() const { return data_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index cols() const { return data_.cols(); }

  // Upcast copy used by every metric computation.
  Eigen::MatrixXd to_double() const { return data_.cast<double>(); }

 private:
  std::string layer_id_;
  RowMatrixF data_;
};

struct SampleRecord {
  std::string sample_id;
  Authenticity authenticity = Authenticity::real;
  ArtifactKind artifact_kind = ArtifactKind::none;
  double severity = 0.0;
  std::string base_image_id;
};

struct SampleManifest {
  std::string layer_id;
  std::string model_name;
  std::string created_at;
  std::string format_version = "1";
  // Declared severity grid; when non-empty every record's severity must be
  // one of these values.
  std::vector<double> severity_grid;
  std::vector<SampleRecord> records;
};

// Throws ValidationError naming the first violated constraint.
void validate_manifest(const SampleManifest& manifest, Eigen::Index n_rows);
void validate_consistency(const ActivationSet& set, const SampleManifest& manifest);

// Grouped by (base_image_id, artifact_kind), sorted severities must be
// strictly increasing (no repeated level for one image and kind).
bool severities_strictly_increasing(const SampleManifest& manifest);

std::string manifest_to_json(const SampleManifest& manifest);
SampleManifest manifest_from_json(std::string_view text);

void write_activation_set(const ActivationSet& set, const SampleManifest& manifest,
                          const std::filesystem::path& dir);
std::pair<ActivationSet, SampleManifest> read_activation_set(
    const std::filesystem::path& dir);

// `<root>/<run_id>/<layer_id>/`
std::filesystem::path activation_dir(const std::filesystem::path& root,
                                     std::string_view run_id,
                                     std::string_view layer_id);

}  // namespace fm
