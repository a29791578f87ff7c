#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fm/error.hpp"
#include "fm/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json small_config_json() {
  return json::parse(R"({
    "model_source": "toy",
    "n_real": 12, "n_fake": 12, "n_eval_real": 10, "n_eval_fake": 10,
    "seed": 5,
    "layers": ["L4", "L5"],
    "sweep": {"levels": 4, "p_max": 0.6, "n_real": 1, "n_fake": 1},
    "stage1": {"n_samples": 4},
    "sae": {"lr": 0.001, "max_epochs": 2},
    "steering": {"layer": "L5"}
  })");
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fm_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

fm::RunConfig small_config(const fs::path& out) {
  auto c = fm::config_from_json(small_config_json());
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_timestamp(std::string text) {
  json j = json::parse(text);
  j.erase("created_at");
  return j.dump();
}

}  // namespace

TEST(Config, DefaultsAndEcho) {
  const auto c = fm::config_from_json(json::object());
  EXPECT_TRUE(c.toy_mode());
  EXPECT_EQ(c.layers.size(), 5u);
  EXPECT_EQ(c.sweep.levels, 8);
  EXPECT_EQ(c.sae.lr, 1e-4);
  const auto echo = fm::config_to_json(c);
  EXPECT_FALSE(echo.contains("output_dir"));
  const auto again = fm::config_from_json(json::parse(echo.dump()));
  EXPECT_EQ(fm::config_to_json(again).dump(), echo.dump());
}

TEST(Config, ShippedToyConfigLoads) {
  const auto c = fm::load_config(fs::path(FM_SOURCE_DIR) / "configs" / "toy.json");
  EXPECT_NO_THROW(fm::validate(c));
  EXPECT_EQ(c.seed, 1234u);
}

TEST(Config, Errors) {
  auto bad = [](json j) { return [j] { fm::validate(fm::config_from_json(j)); }; };
  json j = small_config_json();
  j["bogus"] = 1;
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["sae"]["momentum"] = 0.9;
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["n_real"] = "ten";
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["sweep"]["levels"] = 2;
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["steering"]["layer"] = "L1";
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["model_source"] = "gpu";
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["model_source"] = {{"dump", "/nonexistent/fm_dump"}};
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  j = small_config_json();
  j["sae"]["lr"] = -1;
  EXPECT_THROW(bad(j)(), fm::ConfigError);
  EXPECT_THROW(fm::load_config("/nonexistent/fm.json"), fm::Error);
}

TEST(Stages, ParseStage) {
  EXPECT_EQ(fm::parse_stage("2b"), fm::Stage::s2b);
  EXPECT_EQ(fm::parse_stage("stage3"), fm::Stage::s3);
  EXPECT_EQ(fm::parse_stage("all"), fm::Stage::all);
  EXPECT_THROW(fm::parse_stage("5"), fm::Error);
}

TEST(Stages, OrderingErrorNamesStage) {
  const auto out = scratch("ordering");
  const auto c = small_config(out);
  try {
    fm::run_stage(c, fm::Stage::s3);
    FAIL() << "expected OrderingError";
  } catch (const fm::OrderingError& e) {
    EXPECT_NE(std::string(e.what()).find("stage2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(fm::run_stage(c, fm::Stage::s2b), fm::OrderingError);
  fs::remove_all(out);
}

TEST(Stages, ToySplitsAndSweep) {
  const auto c = small_config(scratch("unused"));
  const auto train = fm::toy_split(c, "train");
  EXPECT_EQ(train.images.size(), 24u);
  EXPECT_EQ(train.manifest.records.size(), 24u);
  EXPECT_EQ(train.manifest.records[0].authenticity, fm::Authenticity::real);
  EXPECT_EQ(train.manifest.records[23].authenticity, fm::Authenticity::fake);
  const auto sweep = fm::toy_sweep(c);
  EXPECT_EQ(sweep.images.size(), 4u * 4u * 2u);
  EXPECT_TRUE(fm::severities_strictly_increasing(sweep.manifest));
  EXPECT_THROW(fm::toy_split(c, "test"), fm::ArgumentError);
}

TEST(Stages, SmallToyRunEndToEnd) {
  const auto out = scratch("all");
  const auto c = small_config(out);
  const auto res = fm::run_stage(c, fm::Stage::all);
  const auto& r = res.report;
  ASSERT_TRUE(r.stage1 && r.stage2 && r.stage2b && r.stage3 && r.stage4_completed);
  EXPECT_TRUE(*r.stage4_completed);
  EXPECT_EQ(r.stage1->scores.size(), 15u);
  EXPECT_EQ(r.stage2->layers.size(), 2u);
  EXPECT_EQ(r.stage2b->size(), 4u);
  EXPECT_EQ(r.stage3->size(), 5u);
  for (const auto& curve : *r.stage3) {
    EXPECT_EQ(curve.alphas, fm::kDefaultAlphas);
    EXPECT_EQ(curve.accuracy[4], curve.baseline_accuracy);
  }
  EXPECT_EQ(res.plots.size(), 5u);
  for (const char* f : {"report.json", "stage1_importance.csv", "stage2_sae.csv",
                        "stage2b_manifold.csv", "stage3_steering.csv", "plots/manifold.svg",
                        "stages/stage2.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_TRUE(fs::exists(out / "sae" / "L4" / "w_enc.npy"));

  const auto loaded = fm::load_report(out / "report.json");
  EXPECT_EQ(fm::dump_report(loaded), slurp(out / "report.json"));

  // Re-running a later stage alone reuses the earlier stage files.
  const std::string before = strip_timestamp(slurp(out / "report.json"));
  fm::run_stage(c, fm::Stage::s3);
  EXPECT_EQ(strip_timestamp(slurp(out / "report.json")), before);

  // A fresh output directory reproduces the report.
  const auto out2 = scratch("all_again");
  fm::run_stage(small_config(out2), fm::Stage::all);
  EXPECT_EQ(strip_timestamp(slurp(out2 / "report.json")), before);

  // Stage 2 invalidates its dependants.
  fm::run_stage(c, fm::Stage::s2);
  EXPECT_FALSE(fs::exists(out / "stages" / "stage3.json"));
  const auto partial = fm::load_report(out / "report.json");
  EXPECT_FALSE(partial.stage3.has_value());
  EXPECT_FALSE(*partial.stage4_completed);
  fs::remove_all(out);
  fs::remove_all(out2);
}

TEST(Stages, DumpModeWithoutStageOneFile) {
  const auto dump = scratch("dump");
  fs::create_directories(dump);
  auto c = small_config(scratch("dump_out"));
  c.dump_dir = dump;
  EXPECT_THROW(fm::run_stage(c, fm::Stage::s1), fm::DataError);
  fs::remove_all(dump);
  fs::remove_all(c.output_dir);
}

#ifdef FM_CLI_PATH

namespace {

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" + std::string(FM_CLI_PATH) + "\" " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  json j = small_config_json();
  j["sae"]["max_epochs"] = 1;
  const auto cfg = write_config(dir, j);
  const std::string base = "--config " + cfg.string() + " --out " + (dir / "out").string();

  EXPECT_EQ(run_cli("stage3 " + base), 4);
  EXPECT_EQ(run_cli("stage1 " + base), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));

  EXPECT_EQ(run_cli("run --config /nonexistent/fm.json"), 2);
  EXPECT_EQ(run_cli("run " + base + " --stage 7"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  json bad = j;
  bad["unknown"] = true;
  EXPECT_EQ(run_cli("run --config " + write_config(dir / "bad", bad).string()), 2);

  const auto dump = dir / "empty_dump";
  fs::create_directories(dump);
  json dj = j;
  dj["model_source"] = {{"dump", dump.string()}};
  EXPECT_EQ(run_cli("stage1 --config " + write_config(dir / "dump", dj).string() + " --out " +
                    (dir / "dump_out").string()),
            3);
  fs::remove_all(dir);
}

TEST(Cli, SeedFallsBackToEnvironment) {
  const auto dir = scratch("cli_seed");
  json j = small_config_json();
  j.erase("seed");
  const auto cfg = write_config(dir, j);
  const auto out = dir / "out";
  ASSERT_EQ(run_cli("stage1 --config " + cfg.string() + " --out " + out.string(), "FM_SEED=77"),
            0);
  EXPECT_EQ(fm::load_report(out / "report.json").config.at("seed").get<std::uint64_t>(), 77u);
  ASSERT_EQ(run_cli("stage1 --config " + cfg.string() + " --out " + out.string() +
                        " --seed 9",
                    "FM_SEED=77"),
            0);
  EXPECT_EQ(fm::load_report(out / "report.json").config.at("seed").get<std::uint64_t>(), 9u);
  EXPECT_EQ(run_cli("stage1 --config " + cfg.string() + " --out " + out.string(),
                    "FM_SEED=abc"),
            2);
  fs::remove_all(dir);
}

#endif
