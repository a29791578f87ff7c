#include "fm/activation_store.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fm/error.hpp"

namespace fm {

using nlohmann::json;

std::string_view to_string(Authenticity a) {
  return a == Authenticity::real ? "real" : "fake";
}

std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::none: return "none";
    case ArtifactKind::warp: return "warp";
    case ArtifactKind::lighting: return "lighting";
    case ArtifactKind::blur: return "blur";
    case ArtifactKind::color: return "color";
  }
  return "none";
}

Authenticity parse_authenticity(std::string_view s) {
  if (s == "real") return Authenticity::real;
  if (s == "fake") return Authenticity::fake;
  throw ValidationError("unknown authenticity '" + std::string(s) + "'");
}

ArtifactKind parse_artifact_kind(std::string_view s) {
  for (auto k : {ArtifactKind::none, ArtifactKind::warp, ArtifactKind::lighting,
                 ArtifactKind::blur, ArtifactKind::color})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown artifact kind '" + std::string(s) + "'");
}

ActivationSet::ActivationSet(std::string layer_id, RowMatrixF data)
    : layer_id_(std::move(layer_id)), data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw DataError("activation matrix must have N >= 1 and D >= 1");
  for (Eigen::Index r = 0; r < data_.rows(); ++r)
    for (Eigen::Index c = 0; c < data_.cols(); ++c)
      if (!std::isfinite(data_(r, c))) {
        std::ostringstream msg;
        msg << "non-finite activation at row " << r << ", column " << c;
        throw DataError(msg.str());
      }
}

void validate_manifest(const SampleManifest& m, Eigen::Index n_rows) {
  if (m.format_version != "1")
    throw ValidationError("unsupported format_version '" + m.format_version + "'");
  if (static_cast<Eigen::Index>(m.records.size()) != n_rows)
    throw ValidationError("record count mismatch: manifest has " +
                          std::to_string(m.records.size()) + " records, matrix has " +
                          std::to_string(n_rows) + " rows");
  for (std::size_t i = 1; i < m.severity_grid.size(); ++i)
    if (!(m.severity_grid[i] > m.severity_grid[i - 1]))
      throw ValidationError("severity grid not strictly increasing");
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const std::string where = " (record " + std::to_string(i) + ")";
    if (!(r.severity >= 0.0 && r.severity <= 1.0))
      throw ValidationError("severity outside [0,1]" + where);
    if (r.artifact_kind == ArtifactKind::none && r.severity != 0.0)
      throw ValidationError("severity must be 0 when artifact_kind is none" + where);
    if (!m.severity_grid.empty() && r.artifact_kind != ArtifactKind::none &&
        std::find(m.severity_grid.begin(), m.severity_grid.end(), r.severity) ==
            m.severity_grid.end())
      throw ValidationError("severity not in declared grid" + where);
  }
}

void validate_consistency(const ActivationSet& set, const SampleManifest& m) {
  validate_manifest(m, set.rows());
  if (m.layer_id != set.layer_id())
    throw ValidationError("layer_id mismatch: manifest '" + m.layer_id +
                          "' vs set '" + set.layer_id() + "'");
}

bool severities_strictly_increasing(const SampleManifest& m) {
  std::map<std::pair<std::string, ArtifactKind>, std::vector<double>> groups;
  for (const auto& r : m.records)
    groups[{r.base_image_id, r.artifact_kind}].push_back(r.severity);
  for (auto& [key, sev] : groups) {
    std::sort(sev.begin(), sev.end());
    if (std::adjacent_find(sev.begin(), sev.end(), [](double a, double b) {
          return !(b > a);
        }) != sev.end())
      return false;
  }
  return true;
}

std::string manifest_to_json(const SampleManifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["layer_id"] = m.layer_id;
  j["model_name"] = m.model_name;
  j["created_at"] = m.created_at;
  j["severity_grid"] = m.severity_grid;
  json recs = json::array();
  for (const auto& r : m.records) {
    recs.push_back({{"sample_id", r.sample_id},
                    {"authenticity", to_string(r.authenticity)},
                    {"artifact_kind", to_string(r.artifact_kind)},
                    {"severity", r.severity},
                    {"base_image_id", r.base_image_id}});
  }
  j["records"] = std::move(recs);
  return j.dump(2) + "\n";
}

SampleManifest manifest_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    SampleManifest m;
    m.format_version = j.at("format_version").get<std::string>();
    m.layer_id = j.at("layer_id").get<std::string>();
    m.model_name = j.value("model_name", "");
    m.created_at = j.value("created_at", "");
    if (j.contains("severity_grid"))
      m.severity_grid = j.at("severity_grid").get<std::vector<double>>();
    for (const auto& r : j.at("records")) {
      SampleRecord rec;
      rec.sample_id = r.at("sample_id").get<std::string>();
      rec.authenticity = parse_authenticity(r.at("authenticity").get<std::string>());
      rec.artifact_kind = parse_artifact_kind(r.at("artifact_kind").get<std::string>());
      rec.severity = r.at("severity").get<double>();
      rec.base_image_id = r.at("base_image_id").get<std::string>();
      m.records.push_back(std::move(rec));
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest schema violation: ") + e.what());
  }
}

void write_activation_set(const ActivationSet& set, const SampleManifest& manifest,
                          const std::filesystem::path& dir) {
  validate_consistency(set, manifest);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  write_npy(dir / "activations.npy", set.data());
  const std::string text = manifest_to_json(manifest);
  write_file_bytes(dir / "manifest.json",
                   {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::pair<ActivationSet, SampleManifest> read_activation_set(
    const std::filesystem::path& dir) {
  const auto bytes = read_file_bytes(dir / "manifest.json");
  SampleManifest manifest = manifest_from_json(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  RowMatrixF data = read_npy(dir / "activations.npy");
  ActivationSet set(manifest.layer_id, std::move(data));
  validate_consistency(set, manifest);
  return {std::move(set), std::move(manifest)};
}

std::filesystem::path activation_dir(const std::filesystem::path& root,
                                     std::string_view run_id,
                                     std::string_view layer_id) {
  return root / std::string(run_id) / std::string(layer_id);
}

}  // namespace fm
