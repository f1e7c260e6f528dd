#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "locenc/siren.hpp"
#include "locenc/sphere.hpp"

namespace locenc {

/// Cosine similarity of every grid cell's embedding to a reference embedding.
/// Cells are resolution-degree squares; centers sit at (lon + res/2, lat + res/2).
/// Values are stored row-major with latitude rows (south to north) and
/// longitude columns (west to east).
struct SimilarityGrid {
  GeoCoordinate reference;
  double resolution = 1.0;
  int n_lon = 0;
  int n_lat = 0;
  std::vector<double> values;

  double lon_center(int i) const { return -180.0 + (i + 0.5) * resolution; }
  double lat_center(int j) const { return -90.0 + (j + 0.5) * resolution; }
  double at(int lat_row, int lon_col) const { return values[static_cast<std::size_t>(lat_row) * n_lon + lon_col]; }
  std::vector<GeoCoordinate> cell_centers() const;
};

using EmbeddingFn = std::function<Tensor2(std::span<const GeoCoordinate>)>;

/// Requires 360 / resolution and 180 / resolution to be whole numbers.
SimilarityGrid similarity_map(const LocationEncoder& enc, const GeoCoordinate& ref, double resolution = 1.0,
                              int threads = 1);
SimilarityGrid similarity_map(const EmbeddingFn& embed_fn, const GeoCoordinate& ref, double resolution = 1.0,
                              int threads = 1);

struct PCAResult {
  Tensor2 components;                     // k x d, orthonormal rows
  std::vector<double> explained_variance_ratio;  // all d ratios, nonincreasing, sum 1
  std::vector<double> eigenvalues;        // all d covariance eigenvalues, nonincreasing
  Tensor2 projected;                      // n x k scores
  RowVector mean;                         // 1 x d
};

/// Principal components of the rows of `data` via a cyclic Jacobi eigensolve of
/// the covariance. The largest-magnitude entry of each component is positive.
PCAResult pca(const Tensor2& data, int k);

/// Maps scores back to data space: projected * components + mean.
Tensor2 pca_reconstruct(const PCAResult& result);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Tensor2 vectors;             // columns, matching values
  int sweeps = 0;
};

/// Cyclic Jacobi rotations for a symmetric matrix; stops when the off-diagonal
/// Frobenius norm falls below tol times the matrix norm.
EigenDecomposition jacobi_eigen(const Tensor2& symmetric, double tol = 1e-12, int max_sweeps = 100);

// CSV export. Grid: "# ref_lon,ref_lat,resolution" comment line with values on
// the next line, then "lon,lat,similarity" rows.
void write_grid_csv(const std::filesystem::path& path, const SimilarityGrid& grid);
SimilarityGrid read_grid_csv(const std::filesystem::path& path);

/// "component_index,explained_variance_ratio" over all d components.
void write_pca_csv(const std::filesystem::path& path, const PCAResult& result);
std::vector<double> read_pca_csv(const std::filesystem::path& path);

/// "lon,lat,pc1..pck" per coordinate.
void write_scores_csv(const std::filesystem::path& path, std::span<const GeoCoordinate> coords, const PCAResult& result);

}  // namespace locenc
