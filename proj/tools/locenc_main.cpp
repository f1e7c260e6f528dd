// locenc: command-line front end for data generation, pretraining, embedding
// export, downstream evaluation and embedding analysis.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "locenc/analysis.hpp"
#include "locenc/checkpoint.hpp"
#include "locenc/csv.hpp"
#include "locenc/downstream.hpp"
#include "locenc/parallel.hpp"
#include "locenc/pretrain.hpp"
#include "locenc/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace locenc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInternal = 1;

struct UsageError : Error {
  using Error::Error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

/// Run record written next to a subcommand's outputs on success and failure.
struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;  // resolved flags, replayable via `locenc replay`
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::uint64_t seed = 0;
  std::string started = utc_now();
  fs::path path;

  void write(const std::string& status, const std::string& message, int exit_code) const {
    if (path.empty()) return;
    json j{{"subcommand", subcommand},
           {"version", LOCENC_VERSION},
           {"argv", argv},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs},
           {"seed", seed},
           {"started_at", started},
           {"finished_at", utc_now()},
           {"status", status},
           {"exit_code", exit_code}};
    if (!message.empty()) j["error"] = message;
    try {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_json(path, j);
    } catch (const std::exception& e) {
      std::cerr << "locenc: could not write manifest: " << e.what() << '\n';
    }
  }
};

std::string fmt(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------- options

struct GenDataOptions {
  std::string spec;
  std::size_t n = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct PretrainOptions {
  std::string pairs;
  std::string out;
  std::string log;
  PretrainConfig cfg;
  bool coupled_wd = false;
  bool no_jitter = false;
  bool fixed_tau = false;
  bool progress = false;
};

struct EmbedOptions {
  std::string ckpt;
  std::string coords;
  std::string out;
};

struct DownstreamOptions {
  std::string labels;
  std::string featurizer;
  std::string split = "random";
  int repeats = 10;
  std::string out;
  std::string task;
  std::uint64_t seed = 0;
  int threads = 1;
  bool no_scale = false;
  SearchSpace space;
};

struct SimmapOptions {
  std::string ckpt;
  std::string ref;
  double resolution = 1.0;
  std::string out;
  int threads = 1;
};

struct PcaOptions {
  std::string ckpt;
  std::string coords;
  std::string emb;
  int k = 3;
  std::string out;
  std::string scores;
};

GeoCoordinate parse_ref(const std::string& text) {
  const auto fields = csv::split_fields(text);
  if (fields.size() != 2) throw UsageError("--ref expects lon,lat, got '" + text + "'");
  try {
    return GeoCoordinate::make(csv::parse_double(fields[0], "--ref lon"), csv::parse_double(fields[1], "--ref lat"));
  } catch (const Error& e) {
    throw UsageError(std::string("--ref: ") + e.what());
  }
}

// ---------------------------------------------------------------- commands

void run_gen_data(const GenDataOptions& o, Manifest& m) {
  const fs::path prefix = o.out;
  m.path = with_suffix(prefix, ".manifest.json");
  SyntheticWorldSpec spec;
  if (!o.spec.empty()) {
    if (!fs::exists(o.spec)) throw UsageError("world spec '" + o.spec + "' does not exist");
    m.inputs["spec"] = o.spec;
    spec = SyntheticWorldSpec::from_json(read_json(o.spec));
  }
  if (o.seed) spec.seed = *o.seed;
  m.seed = spec.seed;
  const auto world = generate_world(spec, o.n);
  m.config = {{"n", o.n}, {"world", world.spec.to_json()}};
  const auto pairs = with_suffix(prefix, ".pairs.csv");
  const auto labels = with_suffix(prefix, ".labels.csv");
  const auto resolved = with_suffix(prefix, ".world.json");
  write_pairs_csv(pairs, world.pairs);
  write_labels_csv(labels, world.labels);
  write_json(resolved, world.spec.to_json());
  m.outputs = {{"pairs", pairs.string()}, {"labels", labels.string()}, {"world", resolved.string()}};
  std::cout << "wrote " << o.n << " records to " << pairs.string() << " and " << labels.string() << '\n';
}

void run_pretrain(PretrainOptions o, Manifest& m) {
  const fs::path out = o.out;
  m.path = with_suffix(out, ".manifest.json");
  const fs::path log_path = o.log.empty() ? with_suffix(out, ".log.csv") : fs::path(o.log);
  o.cfg.decoupled_weight_decay = !o.coupled_wd;
  o.cfg.jitter = !o.no_jitter;
  o.cfg.tau_trainable = !o.fixed_tau;
  m.seed = o.cfg.seed;
  m.config = o.cfg.to_json();
  m.inputs["pairs"] = o.pairs;
  m.outputs = {{"checkpoint", out.string()}, {"sidecar", sidecar_path(out).string()}, {"log", log_path.string()}};
  o.cfg.validate();

  const PairDataset pairs = read_pairs_csv(o.pairs);
  EpochCallback cb;
  if (o.progress) {
    cb = [&](const EpochRecord& r) {
      std::cerr << "epoch " << r.epoch << "/" << o.cfg.epochs << " train " << fmt(r.train_loss) << " val "
                << fmt(r.val_loss) << " tau " << fmt(r.tau) << '\n';
      return true;
    };
  }
  const auto result = pretrain(pairs, o.cfg, cb);
  const auto& model = result.model;
  save_checkpoint(out, model.encoder, &model.projection, &model.temperature);
  result.log.write_csv(log_path);

  json meta{{"config", o.cfg.to_json()},
            {"l_max", o.cfg.l_max},
            {"embedding_dim", o.cfg.d},
            {"k_img", pairs.k_img()},
            {"epochs_run", result.log.epochs.size()},
            {"best_epoch", model.best_epoch},
            {"best_val_loss", model.best_val_loss},
            {"val_batch_size", result.val_batch_size},
            {"train_size", result.split.train.size()},
            {"val_size", result.split.val.size()}};
  write_sidecar(out, meta);

  if (result.log.epochs.empty()) {
    std::cout << "no epochs run; initialization val loss " << fmt(model.best_val_loss) << '\n';
  } else {
    std::cout << "final val loss " << fmt(result.log.epochs.back().val_loss) << '\n';
    std::cout << "best val loss " << fmt(model.best_val_loss) << " (epoch " << model.best_epoch << ")\n";
  }
}

void run_embed(const EmbedOptions& o, Manifest& m) {
  const fs::path out = o.out;
  m.path = with_suffix(out, ".manifest.json");
  m.inputs = {{"checkpoint", o.ckpt}, {"coords", o.coords}};
  m.outputs = {{"embeddings", out.string()}};
  const auto ck = load_checkpoint(o.ckpt);
  m.config = {{"l_max", ck.l_max()}, {"embedding_dim", ck.encoder.config.output_dim}};
  const auto coords = read_coords_csv(o.coords);
  const Tensor2 e = embed(ck.encoder, coords);
  write_embeddings_csv(out, coords, e);
  std::cout << "wrote " << coords.size() << " embeddings of width " << ck.encoder.config.output_dim << " to "
            << out.string() << '\n';
}

void run_downstream(const DownstreamOptions& o, Manifest& m) {
  const fs::path out = o.out;
  m.path = with_suffix(out, ".manifest.json");
  m.seed = o.seed;
  SplitSpec split;
  try {
    split = SplitSpec::parse(o.split);
  } catch (const Error& e) {
    throw UsageError(std::string("--split: ") + e.what());
  }
  SearchSpace space = o.space;
  space.seed = derive_seed(o.seed, "search");
  m.inputs = {{"labels", o.labels}, {"featurizer", o.featurizer}};
  m.outputs = {{"report", out.string()}};
  json split_json{{"spec", split.describe()}, {"kind", split.kind == SplitSpec::Kind::random ? "random" : "region_holdout"}};
  if (split.kind == SplitSpec::Kind::random) {
    split_json["fractions"] = {split.train, split.val, split.test};
  } else {
    split_json["lon_lo"] = split.lon_lo;
    split_json["lon_hi"] = split.lon_hi;
    split_json["fewshot_fraction"] = split.fewshot_fraction;
    split_json["holdout_val_fraction"] = split.holdout_val_fraction;
  }
  const std::string task = o.task.empty() ? fs::path(o.labels).filename().string() : o.task;
  m.config = {{"task", task},         {"split", split_json},          {"repeats", o.repeats},
              {"search", space.to_json()}, {"threads", o.threads}, {"identity_scaling", !o.no_scale}};
  split.validate();

  const LabeledDataset labels = read_labels_csv(o.labels);
  std::optional<Featurizer> featurizer;
  if (o.featurizer == "identity") {
    featurizer = Featurizer::identity(!o.no_scale);
  } else {
    if (!fs::exists(o.featurizer)) throw UsageError("featurizer checkpoint '" + o.featurizer + "' does not exist");
    featurizer = Featurizer::embeddings(load_checkpoint(o.featurizer).encoder, fs::path(o.featurizer).filename().string());
  }
  const auto report = evaluate_task(task, labels, *featurizer, split, space, o.repeats, o.seed, o.threads);
  write_json(out, report.to_json());
  std::cout << report.metric << " " << fmt(report.mean) << " +- " << fmt(report.std) << " over " << report.values.size()
            << " runs\n";
}

void run_simmap(const SimmapOptions& o, Manifest& m) {
  const fs::path out = o.out;
  m.path = with_suffix(out, ".manifest.json");
  const GeoCoordinate ref = parse_ref(o.ref);
  m.inputs = {{"checkpoint", o.ckpt}};
  m.outputs = {{"grid", out.string()}};
  m.config = {{"reference", {ref.lon, ref.lat}}, {"resolution", o.resolution}, {"threads", o.threads}};
  const auto ck = load_checkpoint(o.ckpt);
  const auto grid = similarity_map(ck.encoder, ref, o.resolution, o.threads);
  write_grid_csv(out, grid);
  const auto mx = *std::max_element(grid.values.begin(), grid.values.end());
  std::cout << "wrote " << grid.n_lat << "x" << grid.n_lon << " grid to " << out.string() << " (max " << fmt(mx) << ")\n";
}

void run_pca(const PcaOptions& o, Manifest& m) {
  const fs::path out = o.out;
  m.path = with_suffix(out, ".manifest.json");
  const fs::path scores = o.scores.empty() ? with_suffix(out, ".scores.csv") : fs::path(o.scores);
  m.config = {{"k", o.k}};
  m.outputs = {{"ratios", out.string()}, {"scores", scores.string()}};
  EmbeddingTable table;
  if (!o.emb.empty()) {
    if (!o.ckpt.empty() || !o.coords.empty()) throw UsageError("pca: give either --emb or --ckpt with --coords");
    m.inputs = {{"embeddings", o.emb}};
    table = read_embeddings_csv(o.emb);
  } else {
    if (o.ckpt.empty() || o.coords.empty()) throw UsageError("pca: give either --emb or --ckpt with --coords");
    m.inputs = {{"checkpoint", o.ckpt}, {"coords", o.coords}};
    table.coords = read_coords_csv(o.coords);
    table.values = embed(load_checkpoint(o.ckpt).encoder, table.coords);
  }
  const auto result = pca(table.values, o.k);
  write_pca_csv(out, result);
  write_scores_csv(scores, table.coords, result);
  std::cout << "explained variance ratio of the first " << o.k << " components:";
  for (int i = 0; i < o.k; ++i) std::cout << ' ' << fmt(result.explained_variance_ratio[static_cast<std::size_t>(i)]);
  std::cout << '\n';
}

// ---------------------------------------------------------------- parsing

int run(std::vector<std::string> args);

struct Cli {
  CLI::App app{"Spherical-harmonic location encoders: contrastive pretraining, downstream evaluation and analysis",
               "locenc"};
  GenDataOptions gen;
  PretrainOptions pre;
  EmbedOptions emb;
  DownstreamOptions down;
  SimmapOptions simmap;
  PcaOptions pca;
  std::string replay_path;
  CLI::App* gen_cmd = nullptr;
  CLI::App* pre_cmd = nullptr;
  CLI::App* emb_cmd = nullptr;
  CLI::App* down_cmd = nullptr;
  CLI::App* analyze_cmd = nullptr;
  CLI::App* simmap_cmd = nullptr;
  CLI::App* pca_cmd = nullptr;
  CLI::App* replay_cmd = nullptr;

  Cli() {
    app.set_version_flag("--version", std::string(LOCENC_VERSION));
    app.require_subcommand(1);
    const int threads = default_thread_count();
    down.threads = threads;
    simmap.threads = threads;

    gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic world (pairs + labels)");
    gen_cmd->add_option("--spec", gen.spec, "World spec JSON (defaults when omitted)");
    gen_cmd->add_option("--n", gen.n, "Number of points")->required()->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
    gen_cmd->add_option("--out", gen.out, "Output prefix")->required();
    gen_cmd->add_option("--seed", gen.seed, "Override the spec seed");

    auto& c = pre.cfg;
    pre_cmd = app.add_subcommand("pretrain", "Contrastive pretraining of a location encoder");
    pre_cmd->add_option("--pairs", pre.pairs, "Pair file (lon,lat,f0..)")->required();
    pre_cmd->add_option("--out", pre.out, "Checkpoint path")->required();
    pre_cmd->add_option("--log", pre.log, "Training log CSV (default <out>.log.csv)");
    pre_cmd->add_option("--L", c.l_max, "Number of Legendre degrees")->capture_default_str();
    pre_cmd->add_option("--d", c.d, "Embedding dimension")->capture_default_str();
    pre_cmd->add_option("--hidden", c.hidden_dim, "Siren hidden width")->capture_default_str();
    pre_cmd->add_option("--layers", c.hidden_layers, "Siren sine layers")->capture_default_str();
    pre_cmd->add_option("--omega0", c.omega0, "Siren frequency scale")->capture_default_str();
    pre_cmd->add_option("--batch", c.batch_size, "Batch size")->capture_default_str();
    pre_cmd->add_option("--epochs", c.epochs, "Epochs")->capture_default_str();
    pre_cmd->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
    pre_cmd->add_option("--wd", c.weight_decay, "Weight decay")->capture_default_str();
    pre_cmd->add_flag("--coupled-wd", pre.coupled_wd, "L2 penalty through the gradient instead of decoupled decay");
    pre_cmd->add_option("--val-fraction", c.val_fraction, "Validation fraction")->capture_default_str();
    pre_cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
    pre_cmd->add_flag("--no-jitter", pre.no_jitter, "Disable coordinate jitter");
    pre_cmd->add_option("--jitter-deg", c.jitter_deg, "Jitter half-width in degrees")->capture_default_str();
    pre_cmd->add_option("--tau", c.tau_init, "Initial temperature")->capture_default_str();
    pre_cmd->add_flag("--fixed-tau", pre.fixed_tau, "Keep the temperature fixed");
    pre_cmd->add_flag("--progress", pre.progress, "Print one line per epoch to stderr");

    emb_cmd = app.add_subcommand("embed", "Export location embeddings");
    emb_cmd->add_option("--ckpt", emb.ckpt, "Checkpoint")->required();
    emb_cmd->add_option("--coords", emb.coords, "Coordinates CSV with lon,lat header")->required();
    emb_cmd->add_option("--out", emb.out, "Output CSV")->required();

    auto& s = down.space;
    down_cmd = app.add_subcommand("downstream", "Evaluate MLP heads on a labeled task");
    down_cmd->add_option("--labels", down.labels, "Label file")->required();
    down_cmd->add_option("--featurizer", down.featurizer, "Checkpoint path or 'identity'")->required();
    down_cmd->add_option("--split", down.split, "random[:tr,va,te] or holdout:lo,hi[,fewshot]")->capture_default_str();
    down_cmd->add_option("--repeats", down.repeats, "Final training runs")->capture_default_str()->check(CLI::PositiveNumber);
    down_cmd->add_option("--out", down.out, "Report JSON")->required();
    down_cmd->add_option("--task", down.task, "Task name (default: label file name)");
    down_cmd->add_option("--seed", down.seed, "Root seed")->capture_default_str();
    down_cmd->add_option("--threads", down.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    down_cmd->add_flag("--no-scale", down.no_scale, "Feed unscaled degrees to the identity featurizer");
    down_cmd->add_option("--trials", s.trial_count, "Random-search trials")->capture_default_str();
    down_cmd->add_option("--search-layers", s.hidden_layers, "Hidden layer counts to sample")->capture_default_str()->delimiter(',');
    down_cmd->add_option("--search-dims", s.hidden_dims, "Hidden widths to sample")->capture_default_str()->delimiter(',');
    down_cmd->add_option("--lr-min", s.lr_min)->capture_default_str();
    down_cmd->add_option("--lr-max", s.lr_max)->capture_default_str();
    down_cmd->add_option("--wd-min", s.wd_min)->capture_default_str();
    down_cmd->add_option("--wd-max", s.wd_max)->capture_default_str();
    down_cmd->add_option("--max-epochs", s.max_epochs)->capture_default_str();
    down_cmd->add_option("--patience", s.patience)->capture_default_str();
    down_cmd->add_option("--head-batch", s.batch_size)->capture_default_str();

    analyze_cmd = app.add_subcommand("analyze", "Embedding analyses");
    analyze_cmd->require_subcommand(1);
    simmap_cmd = analyze_cmd->add_subcommand("simmap", "Cosine-similarity map against a reference location");
    simmap_cmd->add_option("--ckpt", simmap.ckpt, "Checkpoint")->required();
    simmap_cmd->add_option("--ref", simmap.ref, "Reference lon,lat")->required();
    simmap_cmd->add_option("--res", simmap.resolution, "Grid resolution in degrees")->capture_default_str();
    simmap_cmd->add_option("--threads", simmap.threads)->capture_default_str()->check(CLI::PositiveNumber);
    simmap_cmd->add_option("--out", simmap.out, "Grid CSV")->required();
    pca_cmd = analyze_cmd->add_subcommand("pca", "Principal components of embeddings");
    pca_cmd->add_option("--emb", pca.emb, "Embedding CSV from 'embed'");
    pca_cmd->add_option("--ckpt", pca.ckpt, "Checkpoint (with --coords)");
    pca_cmd->add_option("--coords", pca.coords, "Coordinates CSV (with --ckpt)");
    pca_cmd->add_option("--k", pca.k, "Components to keep")->capture_default_str()->check(CLI::PositiveNumber);
    pca_cmd->add_option("--out", pca.out, "Explained-variance CSV")->required();
    pca_cmd->add_option("--scores", pca.scores, "Scores CSV (default <out>.scores.csv)");

    replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_cmd->add_option("manifest", replay_path, "Manifest JSON")->required();
  }
};

template <class T>
std::string str(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return fmt(v);
  } else {
    return std::to_string(v);
  }
}

template <class T>
std::string join_list(const std::vector<T>& v) {
  std::vector<std::string> parts;
  for (const auto& x : v) parts.push_back(str(x));
  return csv::join(parts);
}

std::vector<std::string> resolved_argv(const Cli& cli) {
  if (cli.gen_cmd->parsed()) {
    const auto& o = cli.gen;
    std::vector<std::string> a{"gen-data", "--n", std::to_string(o.n), "--out", o.out};
    if (!o.spec.empty()) a.insert(a.end(), {"--spec", o.spec});
    if (o.seed) a.insert(a.end(), {"--seed", std::to_string(*o.seed)});
    return a;
  }
  if (cli.pre_cmd->parsed()) {
    const auto& o = cli.pre;
    const auto& c = o.cfg;
    std::vector<std::string> a{"pretrain", "--pairs", o.pairs, "--out", o.out,
                               "--log", o.log.empty() ? o.out + ".log.csv" : o.log,
                               "--L", str(c.l_max), "--d", str(c.d), "--hidden", str(c.hidden_dim),
                               "--layers", str(c.hidden_layers), "--omega0", str(c.omega0),
                               "--batch", str(c.batch_size), "--epochs", str(c.epochs), "--lr", str(c.lr),
                               "--wd", str(c.weight_decay), "--val-fraction", str(c.val_fraction),
                               "--seed", str(c.seed), "--jitter-deg", str(c.jitter_deg), "--tau", str(c.tau_init)};
    if (o.coupled_wd) a.push_back("--coupled-wd");
    if (o.no_jitter) a.push_back("--no-jitter");
    if (o.fixed_tau) a.push_back("--fixed-tau");
    return a;
  }
  if (cli.emb_cmd->parsed()) return {"embed", "--ckpt", cli.emb.ckpt, "--coords", cli.emb.coords, "--out", cli.emb.out};
  if (cli.down_cmd->parsed()) {
    const auto& o = cli.down;
    const auto& s = o.space;
    std::vector<std::string> a{"downstream", "--labels", o.labels, "--featurizer", o.featurizer, "--split", o.split,
                               "--repeats", str(o.repeats), "--out", o.out, "--seed", str(o.seed),
                               "--threads", str(o.threads), "--trials", str(s.trial_count),
                               "--search-layers", join_list(s.hidden_layers), "--search-dims", join_list(s.hidden_dims),
                               "--lr-min", str(s.lr_min), "--lr-max", str(s.lr_max), "--wd-min", str(s.wd_min),
                               "--wd-max", str(s.wd_max), "--max-epochs", str(s.max_epochs),
                               "--patience", str(s.patience), "--head-batch", str(s.batch_size)};
    if (!o.task.empty()) a.insert(a.end(), {"--task", o.task});
    if (o.no_scale) a.push_back("--no-scale");
    return a;
  }
  if (cli.simmap_cmd->parsed()) {
    const auto& o = cli.simmap;
    return {"analyze", "simmap", "--ckpt", o.ckpt, "--ref", o.ref, "--res", str(o.resolution),
            "--threads", str(o.threads), "--out", o.out};
  }
  if (cli.pca_cmd->parsed()) {
    const auto& o = cli.pca;
    std::vector<std::string> a{"analyze", "pca", "--k", str(o.k), "--out", o.out,
                               "--scores", o.scores.empty() ? o.out + ".scores.csv" : o.scores};
    if (!o.emb.empty()) a.insert(a.end(), {"--emb", o.emb});
    if (!o.ckpt.empty()) a.insert(a.end(), {"--ckpt", o.ckpt});
    if (!o.coords.empty()) a.insert(a.end(), {"--coords", o.coords});
    return a;
  }
  return {};
}

int dispatch(Cli& cli) {
  if (cli.replay_cmd->parsed()) {
    const json j = read_json(cli.replay_path);
    if (!j.contains("argv") || !j["argv"].is_array() || j["argv"].empty()) {
      throw UsageError(cli.replay_path + ": manifest has no recorded command");
    }
    return run(j["argv"].get<std::vector<std::string>>());
  }

  Manifest m;
  m.argv = resolved_argv(cli);
  try {
    if (cli.gen_cmd->parsed()) {
      m.subcommand = "gen-data";
      run_gen_data(cli.gen, m);
    } else if (cli.pre_cmd->parsed()) {
      m.subcommand = "pretrain";
      run_pretrain(cli.pre, m);
    } else if (cli.emb_cmd->parsed()) {
      m.subcommand = "embed";
      run_embed(cli.emb, m);
    } else if (cli.down_cmd->parsed()) {
      m.subcommand = "downstream";
      run_downstream(cli.down, m);
    } else if (cli.simmap_cmd->parsed()) {
      m.subcommand = "analyze simmap";
      run_simmap(cli.simmap, m);
    } else if (cli.pca_cmd->parsed()) {
      m.subcommand = "analyze pca";
      run_pca(cli.pca, m);
    }
  } catch (const NumericalError& e) {
    m.write("error", e.what(), kExitNumerical);
    throw;
  } catch (const Error& e) {
    m.write("error", e.what(), kExitUsage);
    throw;
  } catch (const std::exception& e) {
    m.write("error", e.what(), kExitInternal);
    throw;
  }
  m.write("ok", "", kExitOk);
  return kExitOk;
}

int run(std::vector<std::string> args) {
  Cli cli;
  try {
    std::reverse(args.begin(), args.end());
    cli.app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = cli.app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return dispatch(cli);
  } catch (const NumericalError& e) {
    std::cerr << "locenc: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "locenc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "locenc: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}
