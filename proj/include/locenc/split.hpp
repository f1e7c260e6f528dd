#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "locenc/sphere.hpp"

namespace locenc {

struct SplitSpec {
  enum class Kind { random, region_holdout };

  Kind kind = Kind::random;
  // Random split fractions, must sum to 1.
  double train = 0.3;
  double val = 0.1;
  double test = 0.6;
  // Region holdout: every point with lon in [lon_lo, lon_hi) goes to test,
  // then fewshot_fraction of those move to train. The remaining points are
  // divided so that holdout_val_fraction of them land in validation.
  double lon_lo = 0.0;
  double lon_hi = 60.0;
  double fewshot_fraction = 0.0;
  double holdout_val_fraction = 0.1;

  static SplitSpec random_split(double train, double val, double test);
  static SplitSpec holdout(double lon_lo, double lon_hi, double fewshot = 0.0, double val_fraction = 0.1);

  void validate() const;
  /// "random:0.3,0.1,0.6" or "holdout:lo,hi,fewshot"
  std::string describe() const;
  /// Parses "random", "random:tr,va,te", or "holdout:lo,hi[,fewshot]".
  static SplitSpec parse(const std::string& text);
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Disjoint, covering index sets; each list is sorted ascending. Deterministic
/// per seed. Throws DomainError if a split that should be non-empty is empty.
SplitIndices split(std::span<const GeoCoordinate> coords, const SplitSpec& spec, std::uint64_t seed);

/// Number of items a fraction selects out of n (round half up).
std::size_t fraction_count(double fraction, std::size_t n);

}  // namespace locenc
