#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "locenc/rng.hpp"
#include "locenc/sphere.hpp"
#include "locenc/tensor.hpp"

namespace locenc {

/// Coordinates aligned with precomputed image-feature vectors (row i of
/// `features` belongs to coords[i]).
struct PairDataset {
  std::vector<GeoCoordinate> coords;
  Tensor2 features;  // n x k_img

  std::size_t size() const { return coords.size(); }
  int k_img() const { return static_cast<int>(features.cols()); }
  /// Throws DomainError unless there are >= 2 records, rows align, and all values are finite.
  void validate() const;
};

enum class TaskKind { regression, classification };

const char* to_string(TaskKind k);

/// Coordinates with a regression target or class id, plus an optional block
/// of extra per-record features that downstream heads append to the location features.
struct LabeledDataset {
  std::vector<GeoCoordinate> coords;
  TaskKind kind = TaskKind::regression;
  std::vector<double> targets;  // regression
  std::vector<int> classes;     // classification
  int class_count = 0;
  Tensor2 extra;                // n x e, e may be 0
  std::vector<std::string> extra_names;

  std::size_t size() const { return coords.size(); }
  void validate() const;
};

// File formats. Pair file header: lon,lat,f0..f{k-1}. Label file header:
// lon,lat,target or lon,lat,class, optionally followed by extra feature columns.

void write_pairs_csv(const std::filesystem::path& path, const PairDataset& data);
PairDataset read_pairs_csv(const std::filesystem::path& path);

void write_labels_csv(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_labels_csv(const std::filesystem::path& path);

/// Coordinates file with a lon,lat header (extra columns ignored).
std::vector<GeoCoordinate> read_coords_csv(const std::filesystem::path& path);

/// Embedding table: header lon,lat,e0..e{d-1}, one row per coordinate.
struct EmbeddingTable {
  std::vector<GeoCoordinate> coords;
  Tensor2 values;  // n x d
};
void write_embeddings_csv(const std::filesystem::path& path, std::span<const GeoCoordinate> coords, const Tensor2& values);
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path);

/// Location augmentation: shifts lat by U(-max_deg, max_deg) and lon by
/// U(-max_deg, max_deg) / max(cos lat, 0.1), then clamps lat and wraps lon.
/// The default 0.009 degrees is about 1 km.
GeoCoordinate jitter(const GeoCoordinate& c, Rng& rng, double max_deg = 0.009);

}  // namespace locenc
