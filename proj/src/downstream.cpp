#include "locenc/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "locenc/adam.hpp"
#include "locenc/parallel.hpp"
#include "locenc/pretrain.hpp"

namespace locenc {

using nlohmann::json;

// ---------------------------------------------------------------- featurizer

Featurizer Featurizer::identity(bool scale) {
  Featurizer f;
  f.scale_ = scale;
  f.name_ = scale ? "identity" : "identity-unscaled";
  return f;
}

Featurizer Featurizer::embeddings(LocationEncoder encoder, std::string label) {
  Featurizer f;
  f.encoder_ = std::make_shared<const LocationEncoder>(std::move(encoder));
  f.name_ = std::move(label);
  return f;
}

int Featurizer::width() const { return encoder_ ? encoder_->config.output_dim : 2; }

Tensor2 Featurizer::operator()(std::span<const GeoCoordinate> coords) const {
  if (encoder_) return embed(*encoder_, coords);
  Tensor2 out(static_cast<Eigen::Index>(coords.size()), 2);
  const double sx = scale_ ? 1.0 / 180.0 : 1.0;
  const double sy = scale_ ? 1.0 / 90.0 : 1.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = coords[i].lon * sx;
    out(static_cast<Eigen::Index>(i), 1) = coords[i].lat * sy;
  }
  return out;
}

// ---------------------------------------------------------------- configs

void HeadConfig::validate() const {
  if (hidden_layers < 0) throw DomainError("head: hidden_layers must be >= 0");
  if (hidden_dim < 1) throw DomainError("head: hidden_dim must be >= 1");
  if (!(lr > 0.0) || !(weight_decay >= 0.0)) throw DomainError("head: lr must be > 0 and weight_decay >= 0");
  if (max_epochs < 1 || patience < 1 || patience > max_epochs) throw DomainError("head: need 1 <= patience <= max_epochs");
  if (batch_size < 1) throw DomainError("head: batch_size must be >= 1");
}

json HeadConfig::to_json() const {
  return json{{"hidden_layers", hidden_layers}, {"hidden_dim", hidden_dim}, {"lr", lr},
              {"weight_decay", weight_decay},   {"max_epochs", max_epochs}, {"patience", patience},
              {"batch_size", batch_size},       {"activation", "relu"}};
}

HeadConfig HeadConfig::from_json(const json& j) {
  HeadConfig c;
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.validate();
  return c;
}

void SearchSpace::validate() const {
  if (hidden_layers.empty() || hidden_dims.empty()) throw DomainError("search space: empty choice list");
  if (!(lr_min > 0.0 && lr_min <= lr_max)) throw DomainError("search space: need 0 < lr_min <= lr_max");
  if (!(wd_min > 0.0 && wd_min <= wd_max)) throw DomainError("search space: need 0 < wd_min <= wd_max");
  if (trial_count < 1) throw DomainError("search space: trial_count must be >= 1");
  for (int h : hidden_layers) {
    if (h < 0) throw DomainError("search space: negative hidden layer count");
  }
  for (int d : hidden_dims) {
    if (d < 1) throw DomainError("search space: hidden dims must be >= 1");
  }
}

json SearchSpace::to_json() const {
  return json{{"hidden_layers", hidden_layers}, {"hidden_dims", hidden_dims}, {"lr_min", lr_min},
              {"lr_max", lr_max},               {"wd_min", wd_min},           {"wd_max", wd_max},
              {"trial_count", trial_count},     {"max_epochs", max_epochs},   {"patience", patience},
              {"batch_size", batch_size},       {"seed", seed}};
}

HeadConfig SearchSpace::sample(Rng& rng) const {
  HeadConfig c;
  c.hidden_layers = hidden_layers[uniform_index(rng, hidden_layers.size())];
  c.hidden_dim = hidden_dims[uniform_index(rng, hidden_dims.size())];
  c.lr = std::exp(uniform(rng, std::log(lr_min), std::log(lr_max)));
  if (lr_min == lr_max) c.lr = lr_min;
  c.weight_decay = std::exp(uniform(rng, std::log(wd_min), std::log(wd_max)));
  if (wd_min == wd_max) c.weight_decay = wd_min;
  c.max_epochs = max_epochs;
  c.patience = std::min(patience, max_epochs);
  c.batch_size = batch_size;
  return c;
}

// ---------------------------------------------------------------- metrics

double metric_r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("metric_r2: length mismatch");
  if (truth.empty()) throw DomainError("metric_r2: empty input");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  if (!(sst > 0.0)) throw DomainError("metric_r2: truth has zero variance");
  return 1.0 - sse / sst;
}

double metric_accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ShapeError("metric_accuracy: length mismatch");
  if (truth.empty()) throw DomainError("metric_accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

// ---------------------------------------------------------------- MLP head

Tensor2 MlpHead::forward(const Tensor2& features) const {
  if (features.cols() != feature_mean.cols()) {
    throw ShapeError("head: features have " + std::to_string(features.cols()) + " columns, head expects " +
                     std::to_string(feature_mean.cols()));
  }
  Tensor2 h = (features.rowwise() - feature_mean).array().rowwise() / feature_scale.array();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) h = layers[i].forward(h).cwiseMax(0.0);
  Tensor2 out = layers.back().forward(h);
  if (kind == TaskKind::regression) out = (out.array() * target_scale + target_mean).matrix();
  return out;
}

std::vector<double> MlpHead::predict(const Tensor2& features) const {
  if (kind != TaskKind::regression) throw DomainError("predict: head is a classifier");
  const Tensor2 out = forward(features);
  return std::vector<double>(out.data(), out.data() + out.size());
}

std::vector<int> MlpHead::predict_classes(const Tensor2& features) const {
  if (kind != TaskKind::classification) throw DomainError("predict_classes: head is a regressor");
  const Tensor2 out = forward(features);
  std::vector<int> cls(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::Index best = 0;
    out.row(i).maxCoeff(&best);
    cls[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return cls;
}

namespace {

Tensor2 gather_rows(const Tensor2& x, std::span<const std::size_t> idx, RowAccessLog* access) {
  if (access) access->record(idx);
  Tensor2 out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

DenseLayer he_layer(const std::string& name, int fan_in, int fan_out, double bound, Rng& rng) {
  Tensor2 w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  DenseLayer l;
  l.weight = Parameter(name + ".weight", std::move(w));
  l.bias = Parameter(name + ".bias", Tensor2::Zero(1, fan_out));
  l.bias.decay = false;
  l.weight.zero_grad();
  l.bias.zero_grad();
  return l;
}

Var head_forward(Tape& tape, MlpHead& head, const Tensor2& standardized) {
  Var h = tape.constant(standardized);
  for (std::size_t i = 0; i + 1 < head.layers.size(); ++i) h = relu(head.layers[i].forward(tape, h));
  return head.layers.back().forward(tape, h);
}

struct Targets {
  Tensor2 regression;       // n x 1 standardized
  std::vector<int> classes;
};

Var head_loss(Var out, const Targets& t, TaskKind kind) {
  return kind == TaskKind::regression ? mse_loss(out, t.regression) : softmax_cross_entropy(out, t.classes);
}

Targets make_targets(const LabeledDataset& labels, std::span<const std::size_t> idx, const MlpHead& head,
                     RowAccessLog* access) {
  if (access) access->record(idx);
  Targets t;
  if (labels.kind == TaskKind::regression) {
    t.regression.resize(static_cast<Eigen::Index>(idx.size()), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      t.regression(static_cast<Eigen::Index>(i), 0) = (labels.targets[idx[i]] - head.target_mean) / head.target_scale;
    }
  } else {
    t.classes = gather(labels.classes, idx);
  }
  return t;
}

double eval_loss(const MlpHead& head, const Tensor2& standardized, const Targets& t) {
  Tensor2 h = standardized;
  for (std::size_t i = 0; i + 1 < head.layers.size(); ++i) h = head.layers[i].forward(h).cwiseMax(0.0);
  const Tensor2 out = head.layers.back().forward(h);
  if (head.kind == TaskKind::regression) return (out - t.regression).squaredNorm() / static_cast<double>(out.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    const double lse = mx + std::log((out.row(i).array() - mx).exp().sum());
    total += lse - out(i, t.classes[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(out.rows());
}

}  // namespace

TrainedHead train_head(const Tensor2& features, const LabeledDataset& labels, const HeadConfig& cfg,
                       const SplitIndices& split, std::uint64_t seed, RowAccessLog* access) {
  cfg.validate();
  labels.validate();
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("train_head: " + std::to_string(features.rows()) + " feature rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (split.train.empty() || split.val.empty()) throw DomainError("train_head: empty train or validation split");

  TrainedHead result;
  MlpHead& head = result.head;
  head.kind = labels.kind;

  const Tensor2 x_train = gather_rows(features, split.train, access);
  const Tensor2 x_val = gather_rows(features, split.val, access);

  head.feature_mean = x_train.colwise().mean();
  head.feature_scale = ((x_train.rowwise() - head.feature_mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < head.feature_scale.cols(); ++j) {
    if (!(head.feature_scale(j) > 1e-12)) head.feature_scale(j) = 1.0;
  }

  int out_dim = 1;
  if (labels.kind == TaskKind::regression) {
    const auto y = gather(labels.targets, split.train);
    const auto [m, s] = mean_and_std(y);
    head.target_mean = m;
    head.target_scale = s > 1e-12 ? s : 1.0;
  } else {
    if (labels.class_count < 2) throw DomainError("train_head: classification needs at least 2 classes");
    std::set<int> seen;
    for (auto i : split.train) seen.insert(labels.classes[i]);
    if (seen.size() < 2) throw DomainError("train_head: degenerate classification split (single class in train)");
    head.class_count = labels.class_count;
    out_dim = labels.class_count;
  }

  const Targets t_train = make_targets(labels, split.train, head, access);
  const Targets t_val = make_targets(labels, split.val, head, access);
  const Tensor2 s_train = (x_train.rowwise() - head.feature_mean).array().rowwise() / head.feature_scale.array();
  const Tensor2 s_val = (x_val.rowwise() - head.feature_mean).array().rowwise() / head.feature_scale.array();

  Rng init_rng = make_rng(seed, "head.init");
  int fan_in = static_cast<int>(features.cols());
  for (int i = 0; i < cfg.hidden_layers; ++i) {
    head.layers.push_back(he_layer("head.hidden" + std::to_string(i), fan_in, cfg.hidden_dim, std::sqrt(6.0 / fan_in), init_rng));
    fan_in = cfg.hidden_dim;
  }
  head.layers.push_back(he_layer("head.out", fan_in, out_dim, 1.0 / std::sqrt(static_cast<double>(fan_in)), init_rng));

  std::vector<Parameter*> params;
  for (auto& l : head.layers) {
    params.push_back(&l.weight);
    params.push_back(&l.bias);
  }
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  Adam adam(acfg, params);

  Rng shuffle_rng = make_rng(seed, "head.shuffle");
  const std::size_t n = split.train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);

  std::vector<DenseLayer> best_layers = head.layers;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    for (std::size_t start = 0; start < n; start += b) {
      const std::size_t len = std::min(b, n - start);
      Tensor2 xb(static_cast<Eigen::Index>(len), s_train.cols());
      Targets tb;
      if (head.kind == TaskKind::regression) tb.regression.resize(static_cast<Eigen::Index>(len), 1);
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t r = order[start + k];
        xb.row(static_cast<Eigen::Index>(k)) = s_train.row(static_cast<Eigen::Index>(r));
        if (head.kind == TaskKind::regression) {
          tb.regression(static_cast<Eigen::Index>(k), 0) = t_train.regression(static_cast<Eigen::Index>(r), 0);
        } else {
          tb.classes.push_back(t_train.classes[r]);
        }
      }
      adam.zero_grad();
      Tape tape;
      Var loss = head_loss(head_forward(tape, head, xb), tb, head.kind);
      tape.backward(loss);
      adam.step();
    }
    const double val = eval_loss(head, s_val, t_val);
    if (!std::isfinite(val)) throw NumericalError("train_head: validation loss diverged in epoch " + std::to_string(epoch));
    result.epochs_run = epoch;
    if (val < best) {
      best = val;
      best_layers = head.layers;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  head.layers = std::move(best_layers);
  result.val_loss = best;
  return result;
}

SearchResult random_search(const Tensor2& features, const LabeledDataset& labels, const SearchSpace& space,
                           const SplitIndices& split, int threads, RowAccessLog* access) {
  space.validate();
  SearchResult result;
  Rng rng = make_rng(space.seed, "search.sample");
  for (int i = 0; i < space.trial_count; ++i) {
    TrialResult t;
    t.config = space.sample(rng);
    t.seed = derive_seed(space.seed, "search.trial." + std::to_string(i));
    result.trials.push_back(t);
  }
  std::vector<RowAccessLog> logs(result.trials.size());
  std::vector<std::string> failures(result.trials.size());
  parallel_for(result.trials.size(), threads, [&](std::size_t i) {
    auto& t = result.trials[i];
    try {
      t.val_loss = train_head(features, labels, t.config, split, t.seed, access ? &logs[i] : nullptr).val_loss;
    } catch (const NumericalError& e) {
      t.val_loss = std::numeric_limits<double>::quiet_NaN();
      failures[i] = e.what();
    }
  });
  if (access) {
    for (auto& l : logs) access->record(l.rows);
  }
  bool found = false;
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const double v = result.trials[i].val_loss;
    if (!std::isfinite(v)) continue;
    if (!found || v < result.trials[result.best_index].val_loss) {
      result.best_index = i;
      found = true;
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "random_search: all " << result.trials.size() << " trials diverged:";
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
      os << "\n  trial " << i << " " << result.trials[i].config.to_json().dump() << ": " << failures[i];
    }
    throw NumericalError(os.str());
  }
  result.best = result.trials[result.best_index].config;
  return result;
}

json EvalReport::to_json() const {
  json trials_json = json::array();
  for (const auto& t : trials) {
    trials_json.push_back(json{{"config", t.config.to_json()},
                               {"val_loss", std::isfinite(t.val_loss) ? json(t.val_loss) : json(nullptr)},
                               {"seed", t.seed}});
  }
  json split_json{{"spec", split.describe()},
                  {"kind", split.kind == SplitSpec::Kind::random ? "random" : "region_holdout"},
                  {"train_size", train_size},
                  {"val_size", val_size},
                  {"test_size", test_size}};
  if (split.kind == SplitSpec::Kind::random) {
    split_json["fractions"] = {split.train, split.val, split.test};
  } else {
    split_json["lon_lo"] = split.lon_lo;
    split_json["lon_hi"] = split.lon_hi;
    split_json["fewshot_fraction"] = split.fewshot_fraction;
    split_json["holdout_val_fraction"] = split.holdout_val_fraction;
  }
  return json{{"task", task},         {"metric", metric},          {"featurizer", featurizer},
              {"values", values},     {"mean", mean},              {"std", std},
              {"repeat_count", values.size()}, {"chosen_config", chosen.to_json()}, {"split", split_json},
              {"seed", seed},         {"seeds", seeds},            {"trials", trials_json}};
}

EvalReport evaluate_task(const std::string& task, const LabeledDataset& labels, const Featurizer& featurizer,
                         const SplitSpec& split_spec, const SearchSpace& space, int repeat_count, std::uint64_t seed,
                         int threads, RowAccessLog* selection_access) {
  labels.validate();
  if (repeat_count < 1) throw DomainError("evaluate_task: repeat_count must be >= 1");
  if (labels.kind == TaskKind::classification && labels.class_count < 2) {
    throw DomainError("evaluate_task: classification task needs at least 2 classes");
  }
  Tensor2 features = featurizer(labels.coords);
  if (labels.extra.cols() > 0) {
    Tensor2 joined(features.rows(), features.cols() + labels.extra.cols());
    joined << features, labels.extra;
    features = std::move(joined);
  }

  const SplitIndices idx = split(labels.coords, split_spec, derive_seed(seed, "split"));
  SearchSpace s = space;
  s.seed = derive_seed(seed, "search");
  const SearchResult search = random_search(features, labels, s, idx, threads, selection_access);

  EvalReport report;
  report.task = task;
  report.metric = labels.kind == TaskKind::regression ? "r2" : "accuracy";
  report.featurizer = featurizer.name();
  report.chosen = search.best;
  report.split = split_spec;
  report.seed = seed;
  report.trials = search.trials;
  report.train_size = idx.train.size();
  report.val_size = idx.val.size();
  report.test_size = idx.test.size();
  for (int r = 0; r < repeat_count; ++r) report.seeds.push_back(derive_seed(seed, "repeat." + std::to_string(r)));
  report.values.assign(static_cast<std::size_t>(repeat_count), 0.0);

  std::vector<RowAccessLog> logs(static_cast<std::size_t>(repeat_count));
  const Tensor2 x_test = gather_rows(features, idx.test, nullptr);
  parallel_for(static_cast<std::size_t>(repeat_count), threads, [&](std::size_t r) {
    const TrainedHead th =
        train_head(features, labels, search.best, idx, report.seeds[r], selection_access ? &logs[r] : nullptr);
    if (labels.kind == TaskKind::regression) {
      report.values[r] = metric_r2(th.head.predict(x_test), gather(labels.targets, idx.test));
    } else {
      report.values[r] = metric_accuracy(th.head.predict_classes(x_test), gather(labels.classes, idx.test));
    }
  });
  if (selection_access) {
    for (auto& l : logs) selection_access->record(l.rows);
  }
  std::tie(report.mean, report.std) = mean_and_std(report.values);
  return report;
}

}  // namespace locenc
