#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "locenc/dataset.hpp"

namespace locenc {

/// A smooth synthetic world: Gaussian bumps on the sphere whose activations,
/// mixed linearly and perturbed by noise, play the role of image features.
/// Bumps come in type_count recurring condition types: bump j draws its
/// mixing row and readout weight around the prototype of type j % type_count,
/// perturbed by type_spread. type_count 0 makes every bump independent.
struct SyntheticWorldSpec {
  int bump_count = 16;
  std::vector<GeoCoordinate> centers;  // empty: drawn from the seed
  double width = 0.2;                  // radians
  int type_count = 4;
  double type_spread = 0.3;
  int feature_dim = 32;
  Tensor2 mixing;                      // bump_count x feature_dim; empty: drawn from the seed
  std::vector<double> readout;         // unit-norm, bump_count; empty: drawn from the seed
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  /// Copy with centers, mixing and readout materialized from the seed where absent.
  SyntheticWorldSpec resolved() const;

  nlohmann::json to_json() const;
  static SyntheticWorldSpec from_json(const nlohmann::json& j);
};

/// Bump activations a_j = exp(-angdist(c, center_j)^2 / (2 width^2)). Needs a resolved spec.
std::vector<double> bump_activations(const SyntheticWorldSpec& spec, const GeoCoordinate& c);

/// Noise-free regression target readout . a at c. Needs a resolved spec.
double world_target(const SyntheticWorldSpec& spec, const GeoCoordinate& c);

struct SyntheticWorld {
  SyntheticWorldSpec spec;  // resolved
  PairDataset pairs;
  LabeledDataset labels;    // regression on readout . a
};

/// Area-uniform points on the sphere with features a * Mixing + N(0, sigma^2)
/// and targets readout . a. Deterministic per spec.seed.
SyntheticWorld generate_world(const SyntheticWorldSpec& spec, std::size_t n_points);

/// Area-uniform random coordinate.
GeoCoordinate random_sphere_point(Rng& rng);

}  // namespace locenc
