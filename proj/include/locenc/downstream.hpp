#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locenc/dataset.hpp"
#include "locenc/siren.hpp"
#include "locenc/split.hpp"

namespace locenc {

/// Turns coordinates into downstream model inputs: either the raw, scaled
/// coordinates (lon/180, lat/90) or frozen location-encoder embeddings.
class Featurizer {
 public:
  static Featurizer identity(bool scale = true);
  static Featurizer embeddings(LocationEncoder encoder, std::string label = "embeddings");

  Tensor2 operator()(std::span<const GeoCoordinate> coords) const;
  bool is_identity() const { return encoder_ == nullptr; }
  const std::string& name() const { return name_; }
  int width() const;

 private:
  std::shared_ptr<const LocationEncoder> encoder_;
  bool scale_ = true;
  std::string name_;
};

struct HeadConfig {
  int hidden_layers = 2;
  int hidden_dim = 128;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int max_epochs = 300;
  int patience = 20;  // epochs without validation improvement before stopping
  int batch_size = 256;

  void validate() const;
  nlohmann::json to_json() const;
  static HeadConfig from_json(const nlohmann::json& j);
  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

struct SearchSpace {
  std::vector<int> hidden_layers{1, 2, 3};
  std::vector<int> hidden_dims{64, 128, 256, 512};
  double lr_min = 1e-4, lr_max = 1e-2;  // log-uniform
  double wd_min = 1e-6, wd_max = 1e-2;  // log-uniform
  int trial_count = 16;
  int max_epochs = 300;
  int patience = 20;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Draws one configuration; consumes a fixed number of variates per call.
  HeadConfig sample(Rng& rng) const;
};

/// Optional instrumentation: every feature/label row a training routine reads.
struct RowAccessLog {
  std::vector<std::size_t> rows;
  void record(std::span<const std::size_t> idx) { rows.insert(rows.end(), idx.begin(), idx.end()); }
};

/// ReLU MLP with a linear output. Inputs are standardized with statistics
/// from the training rows; regression targets likewise, with predictions
/// mapped back to the original units.
struct MlpHead {
  TaskKind kind = TaskKind::regression;
  int class_count = 0;
  std::vector<DenseLayer> layers;
  RowVector feature_mean;
  RowVector feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  /// Regression: n x 1 predictions in target units. Classification: n x class_count logits.
  Tensor2 forward(const Tensor2& features) const;
  std::vector<double> predict(const Tensor2& features) const;
  std::vector<int> predict_classes(const Tensor2& features) const;
};

struct TrainedHead {
  MlpHead head;
  double val_loss = 0.0;  // best validation loss (standardized MSE or cross-entropy)
  int best_epoch = 0;
  int epochs_run = 0;
};

/// Trains a head on split.train with early stopping on split.val. Only train
/// and validation rows of `features` and `labels` are read. Throws DomainError
/// for a single-class classification split and NumericalError on divergence.
TrainedHead train_head(const Tensor2& features, const LabeledDataset& labels, const HeadConfig& cfg,
                       const SplitIndices& split, std::uint64_t seed, RowAccessLog* access = nullptr);

/// 1 - SSE/SST. Throws DomainError when truth has zero variance.
double metric_r2(std::span<const double> pred, std::span<const double> truth);
double metric_accuracy(std::span<const int> pred, std::span<const int> truth);

struct TrialResult {
  HeadConfig config;
  double val_loss = 0.0;  // NaN when the trial diverged
  std::uint64_t seed = 0;
};

struct SearchResult {
  HeadConfig best;
  std::size_t best_index = 0;
  std::vector<TrialResult> trials;
};

/// Samples space.trial_count configurations, trains each once, and returns the
/// one with the lowest validation loss (earliest trial wins ties).
SearchResult random_search(const Tensor2& features, const LabeledDataset& labels, const SearchSpace& space,
                           const SplitIndices& split, int threads = 1, RowAccessLog* access = nullptr);

struct EvalReport {
  std::string task;
  std::string metric;  // "r2" or "accuracy"
  std::string featurizer;
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single run
  HeadConfig chosen;
  SplitSpec split;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // per repeat
  std::vector<TrialResult> trials;
  std::size_t train_size = 0, val_size = 0, test_size = 0;

  nlohmann::json to_json() const;
};

/// Random search once, then repeat_count trainings with distinct seeds, each
/// scored on the untouched test split.
EvalReport evaluate_task(const std::string& task, const LabeledDataset& labels, const Featurizer& featurizer,
                         const SplitSpec& split_spec, const SearchSpace& space, int repeat_count, std::uint64_t seed,
                         int threads = 1, RowAccessLog* selection_access = nullptr);

/// Mean and sample standard deviation.
std::pair<double, double> mean_and_std(std::span<const double> values);

}  // namespace locenc
