#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fm/error.hpp"
#include "fm/json_schema.hpp"
#include "fm/report.hpp"
#include "fm/svg_plot.hpp"

namespace {

using nlohmann::json;

// Published Stage-1 importance rows, in table order.
fm::Stage1Report published_stage1() {
  fm::Stage1Report s;
  s.n_samples = 0;
  const struct {
    int block;
    double proj, attn, mlp;
  } rows[] = {{0, 50.38, 50.36, 45.63},  {6, 38.31, 38.27, 37.33},  {12, 29.59, 29.53, 28.27},
              {18, 27.90, 27.96, 26.62}, {24, 28.18, 28.20, 27.20}, {31, 13.49, 13.47, 12.02}};
  for (const auto& r : rows) {
    s.scores.push_back({r.block, fm::Sublayer::attn_proj, r.proj});
    s.scores.push_back({r.block, fm::Sublayer::attn, r.attn});
    s.scores.push_back({r.block, fm::Sublayer::mlp, r.mlp});
  }
  return s;
}

fm::RunReport full_report() {
  fm::RunReport r;
  r.created_at = "2026-01-01T00:00:00Z";
  r.config = {{"seed", 1}};
  r.stage1 = published_stage1();

  fm::LayerSaeReport layer;
  layer.layer_id = "L1";
  layer.input_dim = 128;
  layer.latent_dim = 16;
  layer.n_train = 90;
  layer.n_val = 10;
  layer.relative_reconstruction_error = 0.25;
  layer.mean_sparsity = 0.208;
  layer.mean_activity_ratio = 0.792;
  layer.mean_activation_frequency = 0.792;
  layer.active_feature_count = 16;
  layer.mean_selectivity = 0.117;
  layer.latent_rho = {0.5, -0.25, 0.0, 0.125};
  layer.trace.initial_total_loss = 2.0;
  layer.trace.initial_val_loss = 2.1;
  layer.trace.best_epoch = 2;
  layer.trace.epochs = {{1.5, 1.4, 0.1, 1.6, 0.8}, {1.2, 1.1, 0.1, 1.3, 0.79}};
  fm::Stage2Report s2;
  s2.layers = {layer};
  s2.mean_sparsity = 0.208;
  s2.mean_activity_ratio = 0.792;
  s2.mean_selectivity = 0.117;
  s2.active_feature_count = 16;
  r.stage2 = s2;

  std::vector<fm::ManifoldEntry> s2b;
  for (auto kind : fm::kArtifactKinds) {
    fm::ManifoldEntry e;
    e.artifact_kind = kind;
    e.layers = {{"L1", 3, 19.15, 0.495, 0.1, 0.95, {3.0, 1.0, 0.5}}};
    e.mean_intrinsic_dim = 3.75;
    e.mean_curvature = 19.15;
    e.mean_selectivity = 0.495;
    s2b.push_back(e);
  }
  r.stage2b = s2b;
  r.stage3 = std::vector<fm::SteeringCurveReport>{
      {"class_mean_diff_k16", "class_mean_diff", 16, "L1", 0.5, {-1, 0, 1}, {0.25, 0.5, 0.75}}};
  r.stage4_completed = true;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fm_report_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Report, PublishedStage1RowsRoundTrip) {
  const auto s = published_stage1();
  ASSERT_EQ(s.scores.size(), 18u);
  const std::string text = fm::to_json(s).dump();
  EXPECT_NE(text.find("{\"block\":0,\"submodule\":\"attn.proj\",\"score\":50.38}"),
            std::string::npos);
  const auto back = fm::stage1_from_json(json::parse(text));
  EXPECT_EQ(back, s);
  EXPECT_EQ(fm::to_json(back).dump(), text);
}

TEST(Report, FullReportRoundTrip) {
  const auto r = full_report();
  const std::string text = fm::dump_report(r);
  ASSERT_EQ(text.back(), '\n');
  const json j = json::parse(text);
  EXPECT_NO_THROW(fm::validate_report_json(j));
  const auto back = fm::report_from_json(j);
  EXPECT_EQ(fm::dump_report(back), text);
  EXPECT_EQ(back.stage2b->size(), 4u);
  EXPECT_EQ(back.stage1->scores[0].score, 50.38);
  EXPECT_EQ(*back.stage4_completed, true);
}

TEST(Report, MinimalReportValidates) {
  fm::RunReport r;
  r.created_at = "x";
  EXPECT_NO_THROW(fm::validate_report_json(json::parse(fm::dump_report(r))));
}

TEST(Report, SchemaRejections) {
  const json good = json::parse(fm::dump_report(full_report()));
  auto expect_reject = [](json j, const char* what) {
    EXPECT_THROW(fm::validate_report_json(j), fm::ValidationError) << what;
    EXPECT_THROW(fm::report_from_json(j), fm::ValidationError) << what;
  };
  json j = good;
  j["stage1"]["scores"][0]["submodule"] = "attn.qkv";
  expect_reject(j, "submodule enum");
  j = good;
  j["stage1"]["scores"][0]["score"] = -1.0;
  expect_reject(j, "negative score");
  j = good;
  j["stage1"]["scores"][0].erase("block");
  expect_reject(j, "missing block");
  j = good;
  j["schema_version"] = "2";
  expect_reject(j, "version");
  j = good;
  j["extra"] = 1;
  expect_reject(j, "unknown key");
  j = good;
  j["stage2b"][0]["artifact_kind"] = "none";
  expect_reject(j, "artifact kind");
  j = good;
  j["stage3"][0]["accuracy"][0] = 1.5;
  expect_reject(j, "accuracy range");
  j = good;
  j["stage4"]["completed"] = "yes";
  expect_reject(j, "stage4 type");

  j = good;
  j["stage3"][0]["accuracy"].push_back(0.5);
  EXPECT_THROW(fm::report_from_json(j), fm::ValidationError);
}

TEST(Report, SchemaViolationsAreListed) {
  json j = json::parse(fm::dump_report(full_report()));
  j["stage1"]["ablation"] = "half";
  j["created_at"] = 5;
  const auto v = fm::schema_violations(fm::report_schema(), j);
  EXPECT_GE(v.size(), 2u);
}

TEST(Plots, CompleteReportGivesFiveFiles) {
  const auto dir = scratch("plots");
  const auto out = fm::emit_plots(full_report(), dir);
  EXPECT_EQ(out.files.size(), 5u);
  EXPECT_TRUE(out.warnings.empty());
  for (const auto& f : out.files) {
    const auto text = slurp(f);
    EXPECT_EQ(text.rfind("<svg", 0) == 0 || text.rfind("<?xml", 0) == 0, true) << f;
    EXPECT_NE(text.find("</svg>"), std::string::npos);
  }
  const auto again = scratch("plots_again");
  fm::emit_plots(full_report(), again);
  for (const auto& f : out.files)
    EXPECT_EQ(slurp(f), slurp(again / f.filename())) << f.filename();
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(again);
}

TEST(Plots, MissingStageThreeWarns) {
  auto r = full_report();
  r.stage3.reset();
  const auto dir = scratch("nostage3");
  const auto out = fm::emit_plots(r, dir);
  EXPECT_EQ(out.files.size(), 4u);
  ASSERT_EQ(out.warnings.size(), 1u);
  EXPECT_NE(out.warnings[0].find("stage3"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "steering.svg"));
  std::filesystem::remove_all(dir);
}

TEST(Plots, EmptySelectivityIsNoData) {
  try {
    fm::selectivity_histogram_panel({});
    FAIL() << "expected PlotError";
  } catch (const fm::PlotError& e) {
    EXPECT_STREQ(e.what(), "no data");
  }
  auto r = full_report();
  r.stage2->layers[0].latent_rho.clear();
  EXPECT_THROW(fm::emit_plots(r, scratch("empty")), fm::PlotError);
  EXPECT_THROW(fm::render_svg("t", {}), fm::PlotError);
}
