// forensic-manifold: staged SAE and manifold analysis over activation dumps.
//
//   forensic-manifold run --config cfg.json [--stage all] [--out DIR] [--seed N]
//   forensic-manifold stage1|stage2|stage2b|stage3 --config cfg.json ...
//   forensic-manifold augment --in face.png --kind blur --p 0.5 --out out.png
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 ordering error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fm/artifact_forge.hpp"
#include "fm/error.hpp"
#include "fm/pipeline.hpp"
#include "fm/png_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitOrdering = 4;

struct RunArgs {
  std::string config;
  std::string out;
  std::string stage = "all";
  std::optional<std::uint64_t> seed;
};

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("FM_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw fm::ConfigError(std::string("FM_SEED is not an unsigned integer: '") + v + "'");
  }
}

int run(const RunArgs& args, fm::Stage stage) {
  auto j = nlohmann::json::object();
  {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = fm::read_file_bytes(args.config);
    } catch (const fm::IoError& e) {
      throw fm::ConfigError(e.what());
    }
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw fm::ConfigError("config '" + args.config + "' is not valid JSON: " + e.what());
    }
  }
  // Seed precedence: --seed, then the config file, then FM_SEED.
  if (args.seed) {
    j["seed"] = *args.seed;
  } else if (!j.contains("seed")) {
    if (auto s = seed_from_env()) j["seed"] = *s;
  }
  if (!args.out.empty()) j["output_dir"] = args.out;
  const fm::RunConfig config = fm::config_from_json(j);

  std::cerr << "forensic-manifold: running " << fm::to_string(stage) << " into "
            << config.output_dir.string() << "\n";
  const auto result = fm::run_stage(config, stage);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << (config.output_dir / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-autoencoder and forensic-manifold analysis of detector activations"};
  app.require_subcommand(1);

  RunArgs args;
  auto add_run_options = [&](CLI::App* sub, bool with_stage) {
    sub->add_option("--config", args.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", args.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", args.seed, "Run seed (overrides the config and FM_SEED)");
    if (with_stage)
      sub->add_option("--stage", args.stage, "1, 2, 2b, 3 or all")->capture_default_str();
  };

  auto* run_cmd = app.add_subcommand("run", "Run one stage or the full pipeline");
  add_run_options(run_cmd, true);
  struct Named {
    const char* name;
    fm::Stage stage;
  };
  const Named stage_cmds[] = {{"stage1", fm::Stage::s1},
                              {"stage2", fm::Stage::s2},
                              {"stage2b", fm::Stage::s2b},
                              {"stage3", fm::Stage::s3}};
  std::vector<std::pair<CLI::App*, fm::Stage>> stage_apps;
  for (const auto& n : stage_cmds) {
    auto* sub = app.add_subcommand(n.name, std::string("Run ") + n.name + " only");
    add_run_options(sub, false);
    stage_apps.emplace_back(sub, n.stage);
  }

  std::string in_png, out_png, kind = "blur";
  double p = 0.0, max_blur = fm::kDefaultMaxBlurRadiusPx, feather = fm::kDefaultFeatherPx;
  std::uint64_t warp_seed = 0;
  auto* augment = app.add_subcommand("augment", "Apply one artifact to a PNG image");
  augment->add_option("--in", in_png, "Input PNG")->required();
  augment->add_option("--out", out_png, "Output PNG")->required();
  augment->add_option("--kind", kind, "warp, lighting, blur or color")->capture_default_str();
  augment->add_option("--p", p, "Severity in [0,1]")->required();
  augment->add_option("--seed", warp_seed, "Warp field seed")->capture_default_str();
  augment->add_option("--max-blur", max_blur, "Blur radius at p = 1 (px)")->capture_default_str();
  augment->add_option("--feather", feather, "Face mask feather (px)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return run(args, fm::parse_stage(args.stage));
    for (const auto& [sub, stage] : stage_apps)
      if (sub->parsed()) return run(args, stage);
    if (augment->parsed()) {
      const auto k = fm::parse_artifact_kind(kind);
      if (k == fm::ArtifactKind::none) throw fm::ConfigError("--kind must name an artifact");
      const auto img = fm::read_png(in_png);
      const auto mask = fm::default_face_mask(img.height(), img.width(), feather);
      fm::write_png(out_png, fm::apply_artifact(img, k, p, mask, warp_seed, max_blur));
      return 0;
    }
  } catch (const fm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fm::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fm::OrderingError& e) {
    std::cerr << "ordering error: " << e.what() << "\n";
    return kExitOrdering;
  } catch (const fm::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
