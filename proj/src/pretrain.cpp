#include "locenc/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "locenc/adam.hpp"
#include "locenc/csv.hpp"
#include "locenc/error.hpp"
#include "locenc/rng.hpp"

namespace locenc {

using nlohmann::json;

void PretrainConfig::validate() const {
  if (l_max < 1) throw DomainError("pretrain: l_max must be >= 1");
  if (d < 1 || hidden_dim < 1 || hidden_layers < 1) throw DomainError("pretrain: dimensions must be >= 1");
  if (batch_size < 2) throw DomainError("pretrain: batch_size must be >= 2");
  if (epochs < 0) throw DomainError("pretrain: epochs must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw DomainError("pretrain: val_fraction must be in (0, 1)");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw DomainError("pretrain: lr and weight_decay must be >= 0");
  if (!(jitter_deg >= 0.0)) throw DomainError("pretrain: jitter_deg must be >= 0");
  if (!(tau_init >= Temperature::kMin && tau_init <= Temperature::kMax)) throw DomainError("pretrain: tau_init out of bounds");
  siren_config().validate();
}

SirenConfig PretrainConfig::siren_config() const {
  SirenConfig c;
  c.input_dim = l_max * l_max;
  c.hidden_dim = hidden_dim;
  c.hidden_layers = hidden_layers;
  c.output_dim = d;
  c.omega0 = omega0;
  return c;
}

json PretrainConfig::to_json() const {
  return json{{"l_max", l_max},
              {"d", d},
              {"hidden_dim", hidden_dim},
              {"hidden_layers", hidden_layers},
              {"omega0", omega0},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"lr", lr},
              {"weight_decay", weight_decay},
              {"decoupled_weight_decay", decoupled_weight_decay},
              {"val_fraction", val_fraction},
              {"seed", seed},
              {"jitter", jitter},
              {"jitter_deg", jitter_deg},
              {"tau_init", tau_init},
              {"tau_trainable", tau_trainable}};
}

PretrainConfig PretrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw DomainError("pretrain config JSON must be an object");
  const json known = PretrainConfig{}.to_json();
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw DomainError("pretrain config JSON: unknown field '" + key + "'");
  }
  PretrainConfig c;
  try {
    c.l_max = j.value("l_max", c.l_max);
    c.d = j.value("d", c.d);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.omega0 = j.value("omega0", c.omega0);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.decoupled_weight_decay = j.value("decoupled_weight_decay", c.decoupled_weight_decay);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.seed = j.value("seed", c.seed);
    c.jitter = j.value("jitter", c.jitter);
    c.jitter_deg = j.value("jitter_deg", c.jitter_deg);
    c.tau_init = j.value("tau_init", c.tau_init);
    c.tau_trainable = j.value("tau_trainable", c.tau_trainable);
  } catch (const json::exception& e) {
    throw DomainError(std::string("pretrain config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,train_loss,val_loss,tau,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ',' << csv::format_double(e.val_loss) << ','
        << csv::format_double(e.tau) << ',' << csv::format_double(e.seconds) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainingLog TrainingLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!csv::read_line(in, line) || line != "epoch,train_loss,val_loss,tau,seconds") {
    throw FormatError(path.string() + ": bad training log header");
  }
  TrainingLog log;
  std::size_t n = 1;
  while (csv::read_line(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = csv::split_fields(line);
    const std::string ctx = path.string() + ":" + std::to_string(n);
    if (f.size() != 5) throw FormatError(ctx + ": expected 5 fields");
    EpochRecord r;
    r.epoch = static_cast<int>(csv::parse_int(f[0], ctx));
    r.train_loss = csv::parse_double(f[1], ctx);
    r.val_loss = csv::parse_double(f[2], ctx);
    r.tau = csv::parse_double(f[3], ctx);
    r.seconds = csv::parse_double(f[4], ctx);
    log.epochs.push_back(r);
  }
  return log;
}

Tensor2 embed(const LocationEncoder& enc, std::span<const GeoCoordinate> coords) {
  const int l_max = static_cast<int>(std::lround(std::sqrt(static_cast<double>(enc.config.input_dim))));
  if (l_max * l_max != enc.config.input_dim) throw DomainError("embed: encoder input is not an l_max^2 basis");
  if (coords.empty()) return Tensor2(0, enc.config.output_dim);
  return siren_forward(enc, sh_basis_batch(coords, l_max));
}

int validation_batch_size(int batch_size, std::size_t n_val) {
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch_size), n_val));
}

namespace {

Tensor2 gather_features(const PairDataset& pairs, std::span<const std::size_t> idx) {
  Tensor2 out(static_cast<Eigen::Index>(idx.size()), pairs.features.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pairs.features.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::vector<GeoCoordinate> gather_coords(const PairDataset& pairs, std::span<const std::size_t> idx) {
  std::vector<GeoCoordinate> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(pairs.coords[i]);
  return out;
}

void copy_values(PretrainedModel& dst, const PretrainedModel& src) {
  for (std::size_t i = 0; i < dst.encoder.layers.size(); ++i) {
    dst.encoder.layers[i].weight.value = src.encoder.layers[i].weight.value;
    dst.encoder.layers[i].bias.value = src.encoder.layers[i].bias.value;
  }
  dst.projection.weight.value = src.projection.weight.value;
  dst.projection.bias.value = src.projection.bias.value;
  dst.temperature.parameter().value = src.temperature.parameter().value;
}

struct BatchEmbeddings {
  Tensor2 loc;
  Tensor2 img;
};

BatchEmbeddings batch_embeddings(const PretrainedModel& model, const PairDataset& pairs, std::span<const std::size_t> idx) {
  const auto coords = gather_coords(pairs, idx);
  return {embed(model.encoder, coords), project_images(model.projection, gather_features(pairs, idx))};
}

}  // namespace

double evaluate_loss(const PretrainedModel& model, const PairDataset& pairs, std::span<const std::size_t> indices,
                     int batch_size) {
  if (batch_size < 2) throw DomainError("evaluate_loss: batch size must be >= 2");
  const std::size_t b = static_cast<std::size_t>(batch_size);
  const std::size_t batches = indices.size() / b;
  if (batches == 0) throw DomainError("evaluate_loss: fewer samples than one batch");
  double total = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    auto e = batch_embeddings(model, pairs, indices.subspan(k * b, b));
    total += clip_loss(EmbeddingBatch{std::move(e.loc), std::move(e.img)}, model.temperature.tau());
  }
  return total / static_cast<double>(batches);
}

double retrieval_accuracy(const PretrainedModel& model, const PairDataset& pairs, std::span<const std::size_t> indices,
                          int batch_size) {
  if (batch_size < 1) throw DomainError("retrieval_accuracy: batch size must be >= 1");
  const std::size_t b = static_cast<std::size_t>(batch_size);
  const std::size_t batches = indices.size() / b;
  if (batches == 0) throw DomainError("retrieval_accuracy: fewer samples than one batch");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < batches; ++k) {
    const auto e = batch_embeddings(model, pairs, indices.subspan(k * b, b));
    const Tensor2 s = cosine_similarity(e.loc, e.img);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      Eigen::Index best = 0;
      s.row(i).maxCoeff(&best);
      if (best == i) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(batches * b);
}

std::vector<ParameterCensusEntry> parameter_census(const PretrainedModel& model) {
  std::vector<ParameterCensusEntry> out;
  for (const Parameter* p : model.encoder.parameters()) out.push_back({p->name, p->value.rows(), p->value.cols()});
  for (const Parameter* p : {&model.projection.weight, &model.projection.bias, &model.temperature.parameter()}) {
    out.push_back({p->name, p->value.rows(), p->value.cols()});
  }
  return out;
}

PretrainResult pretrain(const PairDataset& pairs, const PretrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  pairs.validate();

  PretrainResult result;
  result.split = split(pairs.coords, SplitSpec::random_split(1.0 - cfg.val_fraction, cfg.val_fraction, 0.0), cfg.seed);
  const auto& train_idx = result.split.train;
  const auto& val_idx = result.split.val;
  const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
  if (train_idx.size() < b) {
    throw DomainError("pretrain: training split has " + std::to_string(train_idx.size()) +
                      " records, fewer than one batch of " + std::to_string(b));
  }
  if (val_idx.size() < 2) throw DomainError("pretrain: validation split needs at least 2 records");
  result.val_batch_size = validation_batch_size(cfg.batch_size, val_idx.size());

  PretrainedModel model{siren_init(cfg.siren_config(), derive_seed(cfg.seed, "init.encoder")),
                        projection_init(pairs.k_img(), cfg.d, derive_seed(cfg.seed, "init.projection")),
                        Temperature(cfg.tau_init, cfg.tau_trainable), 0, 0.0};

  std::vector<Parameter*> params = model.encoder.parameters();
  params.push_back(&model.projection.weight);
  params.push_back(&model.projection.bias);
  params.push_back(&model.temperature.parameter());
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  acfg.decoupled = cfg.decoupled_weight_decay;
  Adam adam(acfg, params);

  model.best_val_loss = evaluate_loss(model, pairs, val_idx, result.val_batch_size);
  model.best_epoch = 0;
  PretrainedModel best = model;

  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
  Rng jitter_rng = make_rng(cfg.seed, "jitter");
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  const std::size_t batches = order.size() / b;
  const int l_max = cfg.l_max;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

    double train_total = 0.0;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::span<const std::size_t> idx(order.data() + k * b, b);
      std::vector<GeoCoordinate> coords = gather_coords(pairs, idx);
      if (cfg.jitter) {
        for (auto& c : coords) c = jitter(c, jitter_rng, cfg.jitter_deg);
      }
      adam.zero_grad();
      Tape tape;
      Var x = tape.constant(sh_basis_batch(coords, l_max));
      Var loc = siren_forward(tape, model.encoder, x);
      Var img = project_images(tape, model.projection, tape.constant(gather_features(pairs, idx)));
      Var loss;
      try {
        loss = clip_loss(loc, img, tape.param(model.temperature.parameter()));
        tape.backward(loss);
      } catch (const NumericalError& e) {
        throw NumericalError("pretrain: numerical failure in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      train_total += loss.item();
      adam.step();
      model.temperature.clamp();
    }

    double val_loss = 0.0;
    try {
      val_loss = evaluate_loss(model, pairs, val_idx, result.val_batch_size);
    } catch (const NumericalError& e) {
      throw NumericalError("pretrain: numerical failure in epoch " + std::to_string(epoch) + ": " + e.what());
    }
    const double train_loss = train_total / static_cast<double>(batches);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw NumericalError("pretrain: loss became NaN in epoch " + std::to_string(epoch));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochRecord rec{epoch, train_loss, val_loss, model.temperature.tau(), seconds};
    result.log.epochs.push_back(rec);
    if (epoch == 1 || val_loss < best.best_val_loss) {
      copy_values(best, model);
      best.best_epoch = epoch;
      best.best_val_loss = val_loss;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  result.model = std::move(best);
  return result;
}

}  // namespace locenc
