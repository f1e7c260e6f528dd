#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "locenc/clip.hpp"
#include "locenc/dataset.hpp"
#include "locenc/siren.hpp"
#include "locenc/split.hpp"

namespace locenc {

struct PretrainConfig {
  int l_max = 10;
  int d = 256;
  int hidden_dim = 512;
  int hidden_layers = 2;
  double omega0 = 30.0;
  int batch_size = 512;  // full scale: 8192
  int epochs = 200;      // full scale: 500
  double lr = 1e-4;
  double weight_decay = 1e-2;
  bool decoupled_weight_decay = true;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  bool jitter = true;
  double jitter_deg = 0.009;
  double tau_init = 0.07;
  bool tau_trainable = true;

  void validate() const;
  SirenConfig siren_config() const;
  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double tau = 0.0;
  double seconds = 0.0;  // wall time of the epoch
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;

  /// CSV with header epoch,train_loss,val_loss,tau,seconds.
  void write_csv(const std::filesystem::path& path) const;
  static TrainingLog read_csv(const std::filesystem::path& path);
};

struct PretrainedModel {
  LocationEncoder encoder;
  ImageProjection projection;
  Temperature temperature;
  int best_epoch = 0;  // 0: the initialization (no epochs run)
  double best_val_loss = 0.0;
};

struct PretrainResult {
  PretrainedModel model;
  TrainingLog log;
  SplitIndices split;  // train/val indices into the pair dataset (test empty)
  int val_batch_size = 0;
};

/// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Contrastive pretraining. Holds out val_fraction for validation, trains on
/// shuffled full batches (the last partial batch is dropped) with jittered
/// coordinates, steps Adam on encoder + projection + log(tau), and returns the
/// snapshot with the lowest validation loss. Throws DomainError when the train
/// split is smaller than one batch and NumericalError (naming the epoch) on NaN.
PretrainResult pretrain(const PairDataset& pairs, const PretrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Raw encoder outputs f(c) = Siren(SH(c)), one row per coordinate.
Tensor2 embed(const LocationEncoder& enc, std::span<const GeoCoordinate> coords);

/// Mean contrastive loss over consecutive fixed-size batches of `indices`
/// (no jitter, no shuffling). batch_size must be >= 2.
double evaluate_loss(const PretrainedModel& model, const PairDataset& pairs, std::span<const std::size_t> indices,
                     int batch_size);

/// Fraction of rows whose most similar partner within its batch is its own pair.
double retrieval_accuracy(const PretrainedModel& model, const PairDataset& pairs, std::span<const std::size_t> indices,
                          int batch_size);

/// Validation batch size used by pretrain(): batch_size, or the whole validation set if smaller.
int validation_batch_size(int batch_size, std::size_t n_val);

/// Names and sizes of everything pretraining can change.
struct ParameterCensusEntry {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
};
std::vector<ParameterCensusEntry> parameter_census(const PretrainedModel& model);

}  // namespace locenc
