#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "locenc/tensor.hpp"

namespace locenc {

/// Longitude/latitude in degrees. Construct through make() to get a validated,
/// normalized coordinate: lon in [-180, 180), lat in [-90, 90].
struct GeoCoordinate {
  double lon = 0.0;
  double lat = 0.0;

  static GeoCoordinate make(double lon, double lat);

  friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

/// Wraps any finite longitude into [-180, 180).
double normalize_lon(double lon);

struct SphericalAngles {
  double theta;  // colatitude, [0, pi]
  double phi;    // azimuth, [0, 2 pi)
};

SphericalAngles to_spherical(const GeoCoordinate& c);

/// Great-circle angle between two coordinates, in radians (haversine form).
double angular_distance(const GeoCoordinate& a, const GeoCoordinate& b);

inline constexpr double kEarthRadiusKm = 6371.0088;

inline double haversine_km(const GeoCoordinate& a, const GeoCoordinate& b) {
  return kEarthRadiusKm * angular_distance(a, b);
}

/// Fully normalized associated Legendre function, Condon-Shortley phase included.
/// Normalized so that N(cos t) e^{i m p} is orthonormal on the unit sphere.
double normalized_assoc_legendre(int l, int m, double x);

/// Position of (l, m) in the degree-major, order -l..l layout.
constexpr std::size_t sh_index(int l, int m) {
  return static_cast<std::size_t>(l * l + l + m);
}

/// Real spherical harmonics of degrees 0..l_max-1, all orders; l_max^2 values.
struct SHEmbedding {
  int l_max = 0;
  std::vector<double> values;
};

SHEmbedding sh_basis(const GeoCoordinate& c, int l_max);

/// Writes the l_max^2 basis values for c into out (out.size() must be l_max^2).
void sh_basis_into(const GeoCoordinate& c, int l_max, std::span<double> out);

/// Same basis evaluated directly at spherical angles.
void sh_basis_angles(double theta, double phi, int l_max, std::span<double> out);

/// One row per coordinate.
Tensor2 sh_basis_batch(std::span<const GeoCoordinate> coords, int l_max);

}  // namespace locenc
