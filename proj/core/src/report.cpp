#include "fm/report.hpp"

#include "fm/error.hpp"
#include "fm/json_schema.hpp"

namespace fm {

namespace detail {
extern const char* const kReportSchemaText;
}

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json to_json(const TrainingTrace& t) {
  ordered_json j;
  j["initial_total_loss"] = t.initial_total_loss;
  j["initial_val_loss"] = t.initial_val_loss;
  j["best_epoch"] = t.best_epoch;
  j["early_stopped"] = t.early_stopped;
  j["epochs"] = ordered_json::array();
  for (const auto& e : t.epochs) {
    ordered_json ej;
    ej["total_loss"] = e.total_loss;
    ej["recon_loss"] = e.recon_loss;
    ej["sparsity_penalty"] = e.sparsity_penalty;
    ej["val_loss"] = e.val_loss;
    ej["mean_activity_ratio"] = e.mean_activity_ratio;
    j["epochs"].push_back(std::move(ej));
  }
  return j;
}

TrainingTrace trace_from_json(const json& j) {
  TrainingTrace t;
  t.initial_total_loss = j.at("initial_total_loss").get<double>();
  t.initial_val_loss = j.at("initial_val_loss").get<double>();
  t.best_epoch = j.at("best_epoch").get<int>();
  t.early_stopped = j.at("early_stopped").get<bool>();
  for (const auto& ej : j.at("epochs")) {
    EpochStats e;
    e.total_loss = ej.at("total_loss").get<double>();
    e.recon_loss = ej.at("recon_loss").get<double>();
    e.sparsity_penalty = ej.at("sparsity_penalty").get<double>();
    e.val_loss = ej.at("val_loss").get<double>();
    e.mean_activity_ratio = ej.at("mean_activity_ratio").get<double>();
    t.epochs.push_back(e);
  }
  return t;
}

ordered_json to_json(const Stage2Report& s) {
  ordered_json j;
  j["mean_sparsity"] = s.mean_sparsity;
  j["mean_activity_ratio"] = s.mean_activity_ratio;
  j["mean_selectivity"] = s.mean_selectivity;
  j["active_feature_count"] = s.active_feature_count;
  j["layers"] = ordered_json::array();
  for (const auto& l : s.layers) {
    ordered_json lj;
    lj["layer_id"] = l.layer_id;
    lj["input_dim"] = l.input_dim;
    lj["latent_dim"] = l.latent_dim;
    lj["n_train"] = l.n_train;
    lj["n_val"] = l.n_val;
    lj["relative_reconstruction_error"] = l.relative_reconstruction_error;
    lj["mean_sparsity"] = l.mean_sparsity;
    lj["mean_activity_ratio"] = l.mean_activity_ratio;
    lj["mean_activation_frequency"] = l.mean_activation_frequency;
    lj["active_feature_count"] = l.active_feature_count;
    lj["mean_selectivity"] = l.mean_selectivity;
    lj["latent_rho"] = l.latent_rho;
    lj["trace"] = to_json(l.trace);
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

Stage2Report stage2_from_json(const json& j) {
  Stage2Report s;
  s.mean_sparsity = j.at("mean_sparsity").get<double>();
  s.mean_activity_ratio = j.at("mean_activity_ratio").get<double>();
  s.mean_selectivity = j.at("mean_selectivity").get<double>();
  s.active_feature_count = j.at("active_feature_count").get<int>();
  for (const auto& lj : j.at("layers")) {
    LayerSaeReport l;
    l.layer_id = lj.at("layer_id").get<std::string>();
    l.input_dim = lj.at("input_dim").get<int>();
    l.latent_dim = lj.at("latent_dim").get<int>();
    l.n_train = lj.at("n_train").get<int>();
    l.n_val = lj.at("n_val").get<int>();
    l.relative_reconstruction_error = lj.at("relative_reconstruction_error").get<double>();
    l.mean_sparsity = lj.at("mean_sparsity").get<double>();
    l.mean_activity_ratio = lj.at("mean_activity_ratio").get<double>();
    l.mean_activation_frequency = lj.at("mean_activation_frequency").get<double>();
    l.active_feature_count = lj.at("active_feature_count").get<int>();
    l.mean_selectivity = lj.at("mean_selectivity").get<double>();
    l.latent_rho = lj.at("latent_rho").get<std::vector<double>>();
    l.trace = trace_from_json(lj.at("trace"));
    s.layers.push_back(std::move(l));
  }
  return s;
}

ordered_json to_json(const ManifoldEntry& m) {
  ordered_json j;
  j["artifact_kind"] = std::string(to_string(m.artifact_kind));
  j["mean_intrinsic_dim"] = m.mean_intrinsic_dim;
  j["mean_curvature"] = m.mean_curvature;
  j["mean_selectivity"] = m.mean_selectivity;
  j["layers"] = ordered_json::array();
  for (const auto& l : m.layers) {
    ordered_json lj;
    lj["layer_id"] = l.layer_id;
    lj["intrinsic_dim"] = l.intrinsic_dim;
    lj["curvature"] = l.curvature;
    lj["selectivity"] = l.selectivity;
    lj["shuffled_selectivity"] = l.shuffled_selectivity;
    lj["tau"] = l.tau;
    lj["eigenvalues"] = l.eigenvalues;
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

ManifoldEntry manifold_from_json(const json& j) {
  ManifoldEntry m;
  m.artifact_kind = parse_artifact_kind(j.at("artifact_kind").get<std::string>());
  m.mean_intrinsic_dim = j.at("mean_intrinsic_dim").get<double>();
  m.mean_curvature = j.at("mean_curvature").get<double>();
  m.mean_selectivity = j.at("mean_selectivity").get<double>();
  for (const auto& lj : j.at("layers")) {
    ManifoldLayerEntry l;
    l.layer_id = lj.at("layer_id").get<std::string>();
    l.intrinsic_dim = lj.at("intrinsic_dim").get<int>();
    l.curvature = lj.at("curvature").get<double>();
    l.selectivity = lj.at("selectivity").get<double>();
    l.shuffled_selectivity = lj.at("shuffled_selectivity").get<double>();
    l.tau = lj.at("tau").get<double>();
    l.eigenvalues = lj.at("eigenvalues").get<std::vector<double>>();
    m.layers.push_back(std::move(l));
  }
  return m;
}

ordered_json to_json(const SteeringCurveReport& c) {
  ordered_json j;
  j["vector_id"] = c.vector_id;
  j["construction"] = c.construction;
  j["top_k"] = c.top_k;
  j["layer_id"] = c.layer_id;
  j["baseline_accuracy"] = c.baseline_accuracy;
  j["alphas"] = c.alphas;
  j["accuracy"] = c.accuracy;
  return j;
}

SteeringCurveReport curve_from_json(const json& j) {
  SteeringCurveReport c;
  c.vector_id = j.at("vector_id").get<std::string>();
  c.construction = j.at("construction").get<std::string>();
  c.top_k = j.at("top_k").get<int>();
  c.layer_id = j.at("layer_id").get<std::string>();
  c.baseline_accuracy = j.at("baseline_accuracy").get<double>();
  c.alphas = j.at("alphas").get<std::vector<double>>();
  c.accuracy = j.at("accuracy").get<std::vector<double>>();
  if (c.alphas.size() != c.accuracy.size())
    throw ValidationError("steering curve '" + c.vector_id +
                          "' has different numbers of alphas and accuracies");
  return c;
}

}  // namespace

ordered_json to_json(const Stage1Report& s) {
  ordered_json j;
  j["ablation"] = s.ablation;
  j["n_samples"] = s.n_samples;
  j["scores"] = ordered_json::array();
  for (const auto& r : s.scores) {
    ordered_json rj;
    rj["block"] = r.block;
    rj["submodule"] = std::string(to_string(r.submodule));
    rj["score"] = r.score;
    j["scores"].push_back(std::move(rj));
  }
  return j;
}

Stage1Report stage1_from_json(const json& j) {
  static const json stage1_schema = {{"$defs", report_schema().at("$defs")},
                                     {"$ref", "#/$defs/stage1"}};
  validate_against_schema(stage1_schema, j);
  Stage1Report s;
  s.ablation = j.at("ablation").get<std::string>();
  s.n_samples = j.at("n_samples").get<int>();
  for (const auto& rj : j.at("scores"))
    s.scores.push_back({rj.at("block").get<int>(),
                        parse_sublayer(rj.at("submodule").get<std::string>()),
                        rj.at("score").get<double>()});
  return s;
}

ordered_json report_to_json(const RunReport& r) {
  ordered_json j;
  j["schema_version"] = r.schema_version;
  j["created_at"] = r.created_at;
  j["config"] = r.config;
  if (r.stage1) j["stage1"] = to_json(*r.stage1);
  if (r.stage2) j["stage2"] = to_json(*r.stage2);
  if (r.stage2b) {
    j["stage2b"] = ordered_json::array();
    for (const auto& m : *r.stage2b) j["stage2b"].push_back(to_json(m));
  }
  if (r.stage3) {
    j["stage3"] = ordered_json::array();
    for (const auto& c : *r.stage3) j["stage3"].push_back(to_json(c));
  }
  if (r.stage4_completed) j["stage4"] = {{"completed", *r.stage4_completed}};
  return j;
}

RunReport report_from_json(const json& j) {
  validate_report_json(j);
  RunReport r;
  r.schema_version = j.at("schema_version").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.config = ordered_json::parse(j.at("config").dump());
  if (j.contains("stage1")) r.stage1 = stage1_from_json(j.at("stage1"));
  if (j.contains("stage2")) r.stage2 = stage2_from_json(j.at("stage2"));
  if (j.contains("stage2b")) {
    r.stage2b.emplace();
    for (const auto& m : j.at("stage2b")) r.stage2b->push_back(manifold_from_json(m));
  }
  if (j.contains("stage3")) {
    r.stage3.emplace();
    for (const auto& c : j.at("stage3")) r.stage3->push_back(curve_from_json(c));
  }
  if (j.contains("stage4")) r.stage4_completed = j.at("stage4").at("completed").get<bool>();
  return r;
}

std::string dump_report(const RunReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

const nlohmann::json& report_schema() {
  static const json schema = json::parse(detail::kReportSchemaText);
  return schema;
}

void validate_report_json(const nlohmann::json& j) {
  validate_against_schema(report_schema(), j);
}

}  // namespace fm
