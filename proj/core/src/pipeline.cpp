#include "fm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fm/error.hpp"
#include "fm/synthetic_faces.hpp"
#include "fm/svg_plot.hpp"

namespace fm {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// seeds, time, files

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
  return splitmix64(seed ^ splitmix64(h));
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& s) {
  write_file_bytes(path, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

json read_json_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// Keeps the config echo in file order; plain json sorts object keys.
RunReport read_report_file(const fs::path& path) {
  RunReport r = report_from_json(read_json_file(path));
  const auto bytes = read_file_bytes(path);
  r.config = ordered_json::parse(bytes.begin(), bytes.end()).at("config");
  return r;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// config parsing

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + where(it.key()));
  }

  std::string where(const std::string& key = "") const {
    std::string p = path_.empty() ? "config" : path_;
    return key.empty() ? "'" + p + "'" : "'" + p + "." + key + "'";
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto as_config_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// layers and image sets

int layer_index(const InterventionEncoder& enc, const std::string& id) {
  for (int i = 0; i < enc.n_layers(); ++i)
    if (enc.layer_id(i) == id) return i;
  throw ConfigError("layer '" + id + "' does not exist in the encoder");
}

LabelledImages make_faces(const RunConfig& c, std::string_view split, int n_real, int n_fake) {
  LabelledImages out;
  out.manifest.model_name = "toy-encoder";
  out.manifest.created_at = utc_timestamp();
  std::mt19937_64 strength_rng(derive_seed(c.seed, std::string(split) + "/strength"));
  for (int i = 0; i < n_real + n_fake; ++i) {
    const bool fake = i >= n_real;
    FaceParams fp;
    fp.seed = derive_seed(c.seed, std::string(split) + "/" + std::to_string(i));
    fp.fake_strength = fake ? unit_uniform(strength_rng) : 0.0;
    out.images.push_back(synthesize_face(fp));
    SampleRecord r;
    r.sample_id = std::string(split) + "_" + std::to_string(i);
    r.authenticity = fake ? Authenticity::fake : Authenticity::real;
    r.base_image_id = r.sample_id;
    out.manifest.records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// stage files

fs::path stage_file(const RunConfig& c, Stage s) {
  return c.output_dir / "stages" / (std::string(to_string(s)) + ".json");
}

void require_stage(const RunConfig& c, Stage prerequisite, Stage requested) {
  if (!fs::exists(stage_file(c, prerequisite)))
    throw OrderingError("stage " + std::string(to_string(requested)) + " requires stage " +
                        std::string(to_string(prerequisite)) + " to have run first (missing " +
                        stage_file(c, prerequisite).string() + ")");
}

void save_stage(const RunConfig& c, Stage s, RunReport fragment) {
  make_dirs(c.output_dir / "stages");
  fragment.config = config_to_json(c);
  write_text(stage_file(c, s), dump_report(fragment));
}

std::optional<RunReport> load_stage(const RunConfig& c, Stage s) {
  const auto path = stage_file(c, s);
  if (!fs::exists(path)) return std::nullopt;
  return read_report_file(path);
}

void invalidate_after(const RunConfig& c, Stage s) {
  std::vector<Stage> stale;
  if (s == Stage::s2) stale = {Stage::s2b, Stage::s3};
  for (Stage t : stale) {
    std::error_code ec;
    fs::remove(stage_file(c, t), ec);
  }
}

// ---------------------------------------------------------------------------
// activations

fs::path acts_root(const RunConfig& c) {
  return c.dump_dir ? *c.dump_dir : c.output_dir / "acts";
}

std::pair<ActivationSet, SampleManifest> load_acts(const RunConfig& c, std::string_view split,
                                                    const std::string& layer) {
  const auto dir = activation_dir(acts_root(c), split, layer);
  if (!fs::exists(dir / "activations.npy"))
    throw DataError("no activations for layer '" + layer + "' split '" + std::string(split) +
                    "' under " + dir.string());
  return read_activation_set(dir);
}

std::vector<Authenticity> labels_of(const SampleManifest& m) {
  std::vector<Authenticity> out;
  for (const auto& r : m.records) out.push_back(r.authenticity);
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

void save_standardizer(const fs::path& dir, const Standardizer& s) {
  if (!s.enabled()) return;
  write_npy(dir / "standardizer_mean.npy", s.mean.cast<float>());
  write_npy(dir / "standardizer_scale.npy", s.scale.cast<float>());
}

Standardizer load_standardizer(const fs::path& dir) {
  Standardizer s;
  if (!fs::exists(dir / "standardizer_mean.npy")) return s;
  s.mean = read_npy(dir / "standardizer_mean.npy").row(0).cast<double>();
  s.scale = read_npy(dir / "standardizer_scale.npy").row(0).cast<double>();
  return s;
}

Eigen::MatrixXd encode_with(const SparseAutoencoder& sae, const Standardizer& st,
                            const Eigen::MatrixXd& x) {
  return sae.encode_rows(st.enabled() ? st.apply(x) : x);
}

// ---------------------------------------------------------------------------
// stages

Stage1Report run_stage1(const RunConfig& c) {
  Stage1Report s;
  s.ablation = std::string(to_string(c.stage1.ablation));
  if (!c.toy_mode()) {
    const auto path = *c.dump_dir / "stage1_importance.json";
    if (!fs::exists(path))
      throw DataError("dump mode needs precomputed importance scores in " + path.string());
    return stage1_from_json(read_json_file(path));
  }
  const ToyEncoder enc(c.toy);
  const int n_real = c.stage1.n_samples / 2;
  const auto faces = make_faces(c, "stage1", n_real, c.stage1.n_samples - n_real);
  s.n_samples = static_cast<int>(faces.images.size());
  s.scores = importance_table(enc, faces.images, c.stage1.ablation);
  return s;
}

void write_toy_acts(const RunConfig& c, const ToyEncoder& enc, std::string_view split,
                    LabelledImages set) {
  const auto acts = encode_layers(enc, set.images, c.layers);
  for (const auto& a : acts) {
    set.manifest.layer_id = a.layer_id();
    write_activation_set(a, set.manifest, activation_dir(acts_root(c), split, a.layer_id()));
  }
}

Stage2Report run_stage2(const RunConfig& c) {
  if (c.toy_mode()) {
    const ToyEncoder enc(c.toy);
    write_toy_acts(c, enc, "train", toy_split(c, "train"));
    write_toy_acts(c, enc, "eval", toy_split(c, "eval"));
    write_toy_acts(c, enc, "sweep", toy_sweep(c));
  }

  Stage2Report s;
  for (std::size_t li = 0; li < c.layers.size(); ++li) {
    const std::string& layer = c.layers[li];
    const auto [train, train_manifest] = load_acts(c, "train", layer);
    const auto [sweep, sweep_manifest] = load_acts(c, "sweep", layer);
    if (sweep.cols() != train.cols())
      throw DataError("layer '" + layer + "' has different widths in train and sweep sets");

    TrainConfig tc = c.sae;
    tc.seed = derive_seed(c.seed, "sae-train/" + layer);
    const auto init = init_sae(static_cast<int>(train.cols()), derive_seed(c.seed, "sae-init/" + layer),
                               c.sae_activation);
    const TrainResult tr = train_sae(init, train, tc);

    const Eigen::MatrixXd x = train.to_double();
    const Eigen::MatrixXd codes = encode_with(tr.sae, tr.standardizer, x);
    const auto activity = per_sample_activity(codes, tc.eps_active);

    LayerSaeReport l;
    l.layer_id = layer;
    l.input_dim = tr.sae.input_dim();
    l.latent_dim = tr.sae.latent_dim();
    l.n_train = static_cast<int>(tr.train_rows.size());
    l.n_val = static_cast<int>(tr.val_rows.size());
    const Eigen::MatrixXd xv = rows_of(x, tr.val_rows);
    l.relative_reconstruction_error = relative_reconstruction_error(
        tr.sae, tr.standardizer.enabled() ? tr.standardizer.apply(xv) : xv);
    l.mean_sparsity = activity.mean_sparsity;
    l.mean_activity_ratio = activity.mean_activity_ratio;
    l.mean_activation_frequency = activation_frequency(codes, tc.eps_active).mean();
    l.active_feature_count = active_feature_count(codes, tc.eps_active);
    l.trace = tr.trace;

    // Latent selectivity on the severity sweeps.
    const Eigen::MatrixXd sweep_codes = encode_with(tr.sae, tr.standardizer, sweep.to_double());
    Eigen::VectorXd rho_sum = Eigen::VectorXd::Zero(l.latent_dim);
    double score_sum = 0.0;
    for (ArtifactKind kind : kArtifactKinds) {
      const auto sw = build_sweep(sweep_codes, sweep_manifest, kind);
      const auto sel = selectivity(sw.samples, sw.severities);
      rho_sum += sel.rho;
      score_sum += sel.score;
    }
    const double n_kinds = static_cast<double>(std::size(kArtifactKinds));
    l.mean_selectivity = score_sum / n_kinds;
    const Eigen::VectorXd rho = rho_sum / n_kinds;
    l.latent_rho.assign(rho.data(), rho.data() + rho.size());

    const auto dir = c.output_dir / "sae" / layer;
    save_sae(dir, tr.sae, tc);
    save_standardizer(dir, tr.standardizer);

    s.mean_sparsity += l.mean_sparsity;
    s.mean_activity_ratio += l.mean_activity_ratio;
    s.mean_selectivity += l.mean_selectivity;
    s.active_feature_count += l.active_feature_count;
    s.layers.push_back(std::move(l));
  }
  const double n = static_cast<double>(s.layers.size());
  s.mean_sparsity /= n;
  s.mean_activity_ratio /= n;
  s.mean_selectivity /= n;
  return s;
}

std::vector<ManifoldEntry> run_stage2b(const RunConfig& c) {
  std::vector<ManifoldEntry> out;
  std::vector<std::pair<ActivationSet, SampleManifest>> sets;
  for (const auto& layer : c.layers) sets.push_back(load_acts(c, "sweep", layer));

  for (ArtifactKind kind : kArtifactKinds) {
    ManifoldEntry e;
    e.artifact_kind = kind;
    for (const auto& [acts, manifest] : sets) {
      const auto sw = build_sweep(acts, manifest, kind);
      const auto r = manifold_report(sw, c.manifold.tau, c.manifold.dimension_source);

      Eigen::VectorXd shuffled = sw.severities;
      std::mt19937_64 rng(derive_seed(c.seed, "shuffle/" + std::string(to_string(kind)) + "/" +
                                                  acts.layer_id()));
      for (Eigen::Index i = shuffled.size() - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(shuffled[i], shuffled[j]);
      }

      ManifoldLayerEntry l;
      l.layer_id = acts.layer_id();
      l.intrinsic_dim = r.intrinsic_dim;
      l.curvature = r.curvature;
      l.selectivity = r.selectivity;
      l.shuffled_selectivity = selectivity(sw.samples, shuffled).score;
      l.tau = r.tau;
      l.eigenvalues.assign(r.eigenvalues.data(), r.eigenvalues.data() + r.eigenvalues.size());
      e.mean_intrinsic_dim += l.intrinsic_dim;
      e.mean_curvature += l.curvature;
      e.mean_selectivity += l.selectivity;
      e.layers.push_back(std::move(l));
    }
    const double n = static_cast<double>(e.layers.size());
    e.mean_intrinsic_dim /= n;
    e.mean_curvature /= n;
    e.mean_selectivity /= n;
    out.push_back(std::move(e));
  }
  return out;
}

struct CurveRecipe {
  SteeringConstruction construction;
  int top_k;
};

constexpr CurveRecipe kCurveRecipes[] = {
    {SteeringConstruction::class_mean_diff, 16},
    {SteeringConstruction::class_mean_diff, 64},
    {SteeringConstruction::class_mean_diff, 256},
    {SteeringConstruction::top_selectivity, 16},
    {SteeringConstruction::top_selectivity, 64},
};

std::vector<SteeringCurveReport> run_stage3(const RunConfig& c, const Stage2Report& s2) {
  const std::string& layer = c.steering.layer;
  const auto it = std::find_if(s2.layers.begin(), s2.layers.end(),
                               [&](const LayerSaeReport& l) { return l.layer_id == layer; });
  if (it == s2.layers.end())
    throw OrderingError("stage 3 needs stage 2 results for layer '" + layer + "'");
  const auto sae_dir = c.output_dir / "sae" / layer;
  if (!fs::exists(sae_dir / "sae.json"))
    throw OrderingError("stage 3 needs the stage 2 SAE checkpoint in " + sae_dir.string());
  const SparseAutoencoder sae = load_sae(sae_dir);
  const Standardizer st = load_standardizer(sae_dir);

  const auto [train, train_manifest] = load_acts(c, "train", layer);
  const auto [eval, eval_manifest] = load_acts(c, "eval", layer);
  const Eigen::MatrixXd train_codes = encode_with(sae, st, train.to_double());
  const Eigen::MatrixXd eval_codes = encode_with(sae, st, eval.to_double());
  const auto train_labels = labels_of(train_manifest);
  const auto eval_labels = labels_of(eval_manifest);

  const LogisticHead head = LogisticHead::fit(train_codes, train_labels);
  const double baseline = head.accuracy(eval_codes, eval_labels);
  const Eigen::VectorXd rho =
      Eigen::Map<const Eigen::VectorXd>(it->latent_rho.data(), static_cast<Eigen::Index>(it->latent_rho.size()));

  std::vector<SteeringCurveReport> out;
  for (const auto& recipe : kCurveRecipes) {
    const int k = std::min(recipe.top_k, sae.latent_dim());
    const auto v = steering_vector(train_codes, train_labels, rho, recipe.construction, k);
    const auto curve = steering_curve(head, eval_codes, eval_labels, v, c.steering.alphas);
    SteeringCurveReport r;
    r.vector_id = curve.vector_id;
    r.construction = std::string(to_string(recipe.construction));
    r.top_k = v.top_k;
    r.layer_id = layer;
    r.baseline_accuracy = baseline;
    r.alphas = curve.alphas;
    r.accuracy = curve.accuracy;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV emission

void write_csvs(const RunConfig& c, const RunReport& r) {
  const auto& out = c.output_dir;
  if (r.stage1) {
    std::string s = "block,submodule,score\n";
    for (const auto& x : r.stage1->scores)
      s += std::to_string(x.block) + "," + std::string(to_string(x.submodule)) + "," +
           csv_num(x.score) + "\n";
    write_text(out / "stage1_importance.csv", s);
  }
  if (r.stage2) {
    std::string sum =
        "layer_id,input_dim,latent_dim,n_train,n_val,relative_reconstruction_error,"
        "mean_sparsity,mean_activity_ratio,mean_activation_frequency,active_feature_count,"
        "mean_selectivity,best_epoch,early_stopped\n";
    std::string trace = "layer_id,epoch,total_loss,recon_loss,sparsity_penalty,val_loss,mean_activity_ratio\n";
    std::string sel = "layer_id,latent,rho,abs_rho,abs_rank,abs_cdf\n";
    for (const auto& l : r.stage2->layers) {
      sum += l.layer_id + "," + std::to_string(l.input_dim) + "," + std::to_string(l.latent_dim) +
             "," + std::to_string(l.n_train) + "," + std::to_string(l.n_val) + "," +
             csv_num(l.relative_reconstruction_error) + "," + csv_num(l.mean_sparsity) + "," +
             csv_num(l.mean_activity_ratio) + "," + csv_num(l.mean_activation_frequency) + "," +
             std::to_string(l.active_feature_count) + "," + csv_num(l.mean_selectivity) + "," +
             std::to_string(l.trace.best_epoch) + "," + (l.trace.early_stopped ? "true" : "false") +
             "\n";
      for (std::size_t e = 0; e < l.trace.epochs.size(); ++e) {
        const auto& ep = l.trace.epochs[e];
        trace += l.layer_id + "," + std::to_string(e + 1) + "," + csv_num(ep.total_loss) + "," +
                 csv_num(ep.recon_loss) + "," + csv_num(ep.sparsity_penalty) + "," +
                 csv_num(ep.val_loss) + "," + csv_num(ep.mean_activity_ratio) + "\n";
      }
      const auto n = l.latent_rho.size();
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(l.latent_rho[a]) > std::abs(l.latent_rho[b]);
      });
      std::vector<std::size_t> rank(n);
      for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i + 1;
      for (std::size_t j = 0; j < n; ++j) {
        // fraction of latents with |rho| <= this one
        const double cdf = static_cast<double>(n - rank[j] + 1) / static_cast<double>(n);
        sel += l.layer_id + "," + std::to_string(j) + "," + csv_num(l.latent_rho[j]) + "," +
               csv_num(std::abs(l.latent_rho[j])) + "," + std::to_string(rank[j]) + "," +
               csv_num(cdf) + "\n";
      }
    }
    write_text(out / "stage2_sae.csv", sum);
    write_text(out / "stage2_trace.csv", trace);
    write_text(out / "stage2_selectivity.csv", sel);
  }
  if (r.stage2b) {
    std::string s = "artifact_kind,layer_id,intrinsic_dim,curvature,selectivity,shuffled_selectivity,tau\n";
    for (const auto& e : *r.stage2b)
      for (const auto& l : e.layers)
        s += std::string(to_string(e.artifact_kind)) + "," + l.layer_id + "," +
             std::to_string(l.intrinsic_dim) + "," + csv_num(l.curvature) + "," +
             csv_num(l.selectivity) + "," + csv_num(l.shuffled_selectivity) + "," +
             csv_num(l.tau) + "\n";
    write_text(out / "stage2b_manifold.csv", s);
  }
  if (r.stage3) {
    std::string s = "vector_id,layer_id,alpha,accuracy\n";
    for (const auto& cv : *r.stage3)
      for (std::size_t i = 0; i < cv.alphas.size(); ++i)
        s += cv.vector_id + "," + cv.layer_id + "," + csv_num(cv.alphas[i]) + "," +
             csv_num(cv.accuracy[i]) + "\n";
    write_text(out / "stage3_steering.csv", s);
  }
}

StageResult assemble(const RunConfig& c) {
  StageResult res;
  RunReport& r = res.report;
  r.created_at = utc_timestamp();
  r.config = config_to_json(c);
  if (auto s = load_stage(c, Stage::s1)) r.stage1 = s->stage1;
  if (auto s = load_stage(c, Stage::s2)) r.stage2 = s->stage2;
  if (auto s = load_stage(c, Stage::s2b)) r.stage2b = s->stage2b;
  if (auto s = load_stage(c, Stage::s3)) r.stage3 = s->stage3;
  r.stage4_completed = r.stage1 && r.stage2 && r.stage2b && r.stage3;
  validate_report_json(report_to_json(r));
  write_text(c.output_dir / "report.json", dump_report(r));
  write_csvs(c, r);
  auto plots = emit_plots(r, c.output_dir / "plots");
  res.plots = std::move(plots.files);
  res.warnings = std::move(plots.warnings);
  return res;
}

void run_one(const RunConfig& c, Stage s) {
  switch (s) {
    case Stage::s1: {
      RunReport f;
      f.stage1 = run_stage1(c);
      save_stage(c, Stage::s1, std::move(f));
      break;
    }
    case Stage::s2: {
      invalidate_after(c, Stage::s2);
      RunReport f;
      f.stage2 = run_stage2(c);
      save_stage(c, Stage::s2, std::move(f));
      break;
    }
    case Stage::s2b: {
      require_stage(c, Stage::s2, Stage::s2b);
      RunReport f;
      f.stage2b = run_stage2b(c);
      save_stage(c, Stage::s2b, std::move(f));
      break;
    }
    case Stage::s3: {
      require_stage(c, Stage::s2, Stage::s3);
      const auto s2 = load_stage(c, Stage::s2);
      RunReport f;
      f.stage3 = run_stage3(c, *s2->stage2);
      save_stage(c, Stage::s3, std::move(f));
      break;
    }
    case Stage::all: break;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// public API

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader top(j, "");
  if (const json* src = top.child("model_source")) {
    if (src->is_string()) {
      if (src->get<std::string>() != "toy")
        throw ConfigError("'config.model_source' must be \"toy\" or {\"dump\": <dir>}");
    } else if (src->is_object()) {
      Reader r(*src, "model_source");
      std::string dir;
      r.get("dump", dir);
      r.finish();
      if (dir.empty()) throw ConfigError("'config.model_source.dump' must name a directory");
      c.dump_dir = dir;
    } else {
      throw ConfigError("'config.model_source' must be \"toy\" or {\"dump\": <dir>}");
    }
  }
  top.get("run_id", c.run_id);
  top.get("n_real", c.n_real);
  top.get("n_fake", c.n_fake);
  top.get("n_eval_real", c.n_eval_real);
  top.get("n_eval_fake", c.n_eval_fake);
  top.get("layers", c.layers);
  top.get("seed", c.seed);
  std::string out_dir;
  top.get("output_dir", out_dir);
  if (!out_dir.empty()) c.output_dir = out_dir;

  if (const json* s = top.child("sweep")) {
    Reader r(*s, "sweep");
    r.get("levels", c.sweep.levels);
    r.get("p_max", c.sweep.p_max);
    r.get("max_blur_radius_px", c.sweep.max_blur_radius_px);
    r.get("n_real", c.sweep.n_real);
    r.get("n_fake", c.sweep.n_fake);
    r.get("feather_px", c.sweep.feather_px);
    r.finish();
  }
  if (const json* s = top.child("stage1")) {
    Reader r(*s, "stage1");
    r.get("n_samples", c.stage1.n_samples);
    std::string mode(to_string(c.stage1.ablation));
    r.get("ablation", mode);
    c.stage1.ablation = parse_ablation_mode(mode);
    r.finish();
  }
  if (const json* s = top.child("sae")) {
    Reader r(*s, "sae");
    r.get("lambda", c.sae.lambda);
    r.get("lr", c.sae.lr);
    r.get("max_epochs", c.sae.max_epochs);
    r.get("patience", c.sae.patience);
    r.get("batch_size", c.sae.batch_size);
    r.get("val_fraction", c.sae.val_fraction);
    r.get("eps_active", c.sae.eps_active);
    r.get("standardize", c.sae.standardize);
    std::string act(to_string(c.sae_activation));
    r.get("encoder_activation", act);
    c.sae_activation = parse_encoder_activation(act);
    r.finish();
  }
  if (const json* s = top.child("manifold")) {
    Reader r(*s, "manifold");
    r.get("tau", c.manifold.tau);
    std::string src = c.manifold.dimension_source == DimensionSource::trajectory ? "trajectory"
                                                                                   : "raw_samples";
    r.get("dimension_source", src);
    if (src == "trajectory") c.manifold.dimension_source = DimensionSource::trajectory;
    else if (src == "raw_samples") c.manifold.dimension_source = DimensionSource::raw_samples;
    else throw ConfigError("'config.manifold.dimension_source' must be trajectory or raw_samples");
    r.finish();
  }
  if (const json* s = top.child("steering")) {
    Reader r(*s, "steering");
    r.get("layer", c.steering.layer);
    r.get("alphas", c.steering.alphas);
    r.finish();
  }
  if (const json* s = top.child("toy")) {
    Reader r(*s, "toy");
    r.get("seed", c.toy.seed);
    r.get("layer_widths", c.toy.layer_widths);
    r.get("carry_gain", c.toy.carry_gain);
    r.get("mix_scale", c.toy.mix_scale);
    r.get("logit_scale", c.toy.logit_scale);
    r.get("logit_bias", c.toy.logit_bias);
    r.get("feather_px", c.toy.feather_px);
    if (const json* g = r.child("gains")) {
      try {
        c.toy.gains = g->get<std::vector<std::array<double, 4>>>();
      } catch (const json::exception&) {
        throw ConfigError("'config.toy.gains' must be a list of [warp, lighting, blur, color]");
      }
    }
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    const auto bytes = read_file_bytes(path);
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  if (c.dump_dir) j["model_source"] = {{"dump", c.dump_dir->string()}};
  else j["model_source"] = "toy";
  j["run_id"] = c.run_id;
  j["n_real"] = c.n_real;
  j["n_fake"] = c.n_fake;
  j["n_eval_real"] = c.n_eval_real;
  j["n_eval_fake"] = c.n_eval_fake;
  j["layers"] = c.layers;
  j["seed"] = c.seed;
  j["sweep"] = {{"levels", c.sweep.levels},
                {"p_max", c.sweep.p_max},
                {"max_blur_radius_px", c.sweep.max_blur_radius_px},
                {"n_real", c.sweep.n_real},
                {"n_fake", c.sweep.n_fake},
                {"feather_px", c.sweep.feather_px}};
  j["stage1"] = {{"n_samples", c.stage1.n_samples},
                 {"ablation", std::string(to_string(c.stage1.ablation))}};
  j["sae"] = {{"lambda", c.sae.lambda},
              {"lr", c.sae.lr},
              {"max_epochs", c.sae.max_epochs},
              {"patience", c.sae.patience},
              {"batch_size", c.sae.batch_size},
              {"val_fraction", c.sae.val_fraction},
              {"eps_active", c.sae.eps_active},
              {"standardize", c.sae.standardize},
              {"encoder_activation", std::string(to_string(c.sae_activation))}};
  j["manifold"] = {{"tau", c.manifold.tau},
                   {"dimension_source", c.manifold.dimension_source == DimensionSource::trajectory
                                            ? "trajectory"
                                            : "raw_samples"}};
  j["steering"] = {{"layer", c.steering.layer}, {"alphas", c.steering.alphas}};
  ordered_json toy;
  toy["seed"] = c.toy.seed;
  toy["layer_widths"] = c.toy.layer_widths;
  toy["carry_gain"] = c.toy.carry_gain;
  toy["mix_scale"] = c.toy.mix_scale;
  toy["logit_scale"] = c.toy.logit_scale;
  toy["logit_bias"] = c.toy.logit_bias;
  toy["feather_px"] = c.toy.feather_px;
  if (!c.toy.gains.empty()) toy["gains"] = c.toy.gains;
  j["toy"] = std::move(toy);
  return j;
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(!c.run_id.empty(), "run_id must not be empty");
  need(c.n_real >= 1 && c.n_fake >= 1, "n_real and n_fake must be >= 1");
  need(c.n_real + c.n_fake >= 10, "the SAE training split needs at least 10 images");
  need(c.n_eval_real >= 1 && c.n_eval_fake >= 1, "n_eval_real and n_eval_fake must be >= 1");
  need(c.sweep.levels >= 3, "sweep.levels must be >= 3");
  need(c.sweep.p_max > 0.0 && c.sweep.p_max <= 1.0, "sweep.p_max must lie in (0,1]");
  need(c.sweep.max_blur_radius_px >= 0.0, "sweep.max_blur_radius_px must be >= 0");
  need(c.sweep.n_real >= 0 && c.sweep.n_fake >= 0 && c.sweep.n_real + c.sweep.n_fake >= 1,
       "the sweep needs at least one base image");
  need(c.sweep.feather_px >= 0.0, "sweep.feather_px must be >= 0");
  need(c.stage1.n_samples >= 1, "stage1.n_samples must be >= 1");
  need(!c.layers.empty(), "layers must not be empty");
  need(std::set<std::string>(c.layers.begin(), c.layers.end()).size() == c.layers.size(),
       "layers must not repeat");
  need(std::find(c.layers.begin(), c.layers.end(), c.steering.layer) != c.layers.end(),
       "steering.layer '" + c.steering.layer + "' is not in layers");
  need(!c.steering.alphas.empty(), "steering.alphas must not be empty");
  need(c.manifold.tau > 0.0 && c.manifold.tau <= 1.0, "manifold.tau must lie in (0,1]");
  as_config_error([&] { validate(c.sae); });
  if (c.dump_dir) {
    need(fs::is_directory(*c.dump_dir),
         "dump directory '" + c.dump_dir->string() + "' does not exist");
  } else {
    need(!c.toy.layer_widths.empty(), "toy.layer_widths must not be empty");
    for (int w : c.toy.layer_widths) need(w >= 8, "toy layer widths must be >= 8");
    need(c.toy.gains.empty() || c.toy.gains.size() == c.toy.layer_widths.size(),
         "toy.gains needs one row per layer");
    for (const auto& g : c.toy.gains)
      for (double v : g) need(v >= 0.0, "toy gains must be >= 0");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < c.toy.layer_widths.size(); ++i) ids.insert("L" + std::to_string(i + 1));
    for (const auto& l : c.layers) need(ids.count(l) > 0, "layer '" + l + "' does not exist in the toy encoder");
  }
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::s1: return "stage1";
    case Stage::s2: return "stage2";
    case Stage::s2b: return "stage2b";
    case Stage::s3: return "stage3";
    case Stage::all: return "all";
  }
  return "all";
}

Stage parse_stage(std::string_view s) {
  if (s == "1" || s == "stage1") return Stage::s1;
  if (s == "2" || s == "stage2") return Stage::s2;
  if (s == "2b" || s == "stage2b") return Stage::s2b;
  if (s == "3" || s == "stage3") return Stage::s3;
  if (s == "all") return Stage::all;
  throw ConfigError("unknown stage '" + std::string(s) + "' (expected 1, 2, 2b, 3 or all)");
}

StageResult run_stage(const RunConfig& c, Stage stage) {
  validate(c);
  make_dirs(c.output_dir);
  if (stage == Stage::all) {
    try {
      for (Stage s : {Stage::s1, Stage::s2, Stage::s2b, Stage::s3}) run_one(c, s);
    } catch (...) {
      try {
        assemble(c);
      } catch (...) {
      }
      throw;
    }
  } else {
    run_one(c, stage);
  }
  return assemble(c);
}

RunReport load_report(const fs::path& path) { return read_report_file(path); }

LabelledImages toy_split(const RunConfig& c, std::string_view split) {
  if (split == "train") return make_faces(c, "train", c.n_real, c.n_fake);
  if (split == "eval") return make_faces(c, "eval", c.n_eval_real, c.n_eval_fake);
  throw ArgumentError("unknown split '" + std::string(split) + "'");
}

LabelledImages toy_sweep(const RunConfig& c) {
  const auto base = make_faces(c, "sweep", c.sweep.n_real, c.sweep.n_fake);
  const auto grid = severity_grid(c.sweep.levels, c.sweep.p_max);
  LabelledImages out;
  out.manifest.model_name = "toy-encoder";
  out.manifest.created_at = base.manifest.created_at;
  out.manifest.severity_grid = grid;
  for (ArtifactKind kind : kArtifactKinds) {
    for (std::size_t b = 0; b < base.images.size(); ++b) {
      const Image& img = base.images[b];
      const auto mask = default_face_mask(img.height(), img.width(), c.sweep.feather_px);
      const auto& base_rec = base.manifest.records[b];
      const auto warp_seed = derive_seed(c.seed, "warp/" + base_rec.sample_id);
      for (std::size_t t = 0; t < grid.size(); ++t) {
        out.images.push_back(
            apply_artifact(img, kind, grid[t], mask, warp_seed, c.sweep.max_blur_radius_px));
        SampleRecord r;
        r.sample_id = std::string(to_string(kind)) + "_" + base_rec.sample_id + "_" + std::to_string(t);
        r.authenticity = base_rec.authenticity;
        r.artifact_kind = kind;
        r.severity = grid[t];
        r.base_image_id = base_rec.sample_id;
        out.manifest.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<ActivationSet> encode_layers(const InterventionEncoder& enc,
                                         const std::vector<Image>& images,
                                         const std::vector<std::string>& layers) {
  if (images.empty()) throw ArgumentError("no images to encode");
  std::vector<int> idx;
  for (const auto& l : layers) idx.push_back(layer_index(enc, l));
  std::vector<RowMatrixF> mats;
  for (int i : idx) mats.emplace_back(static_cast<Eigen::Index>(images.size()), enc.width(i));
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto res = enc.encode(images[n], {});
    for (std::size_t k = 0; k < idx.size(); ++k)
      mats[k].row(static_cast<Eigen::Index>(n)) = res.layers[idx[k]].transpose().cast<float>();
  }
  std::vector<ActivationSet> out;
  for (std::size_t k = 0; k < idx.size(); ++k) out.emplace_back(layers[k], std::move(mats[k]));
  return out;
}

}  // namespace fm
