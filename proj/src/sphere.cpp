#include "locenc/sphere.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "locenc/error.hpp"

namespace locenc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

}  // namespace

double normalize_lon(double lon) {
  if (!std::isfinite(lon)) throw DomainError("longitude is not finite");
  if (lon >= -180.0 && lon < 180.0) return lon;
  double r = std::fmod(lon + 180.0, 360.0);
  if (r < 0.0) r += 360.0;
  r -= 180.0;
  // fmod can round a value just below 180 up to exactly 180.
  if (r >= 180.0) r -= 360.0;
  return r;
}

GeoCoordinate GeoCoordinate::make(double lon, double lat) {
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    throw DomainError("latitude " + std::to_string(lat) + " outside [-90, 90]");
  }
  return GeoCoordinate{normalize_lon(lon), lat};
}

SphericalAngles to_spherical(const GeoCoordinate& c) {
  const double theta = kPi / 2.0 - c.lat * kDeg;
  double lon = std::fmod(c.lon, 360.0);
  if (lon < 0.0) lon += 360.0;
  double phi = lon * kDeg;
  if (phi >= 2.0 * kPi) phi = 0.0;
  return {theta < 0.0 ? 0.0 : theta, phi};
}

double angular_distance(const GeoCoordinate& a, const GeoCoordinate& b) {
  const double dlat = (b.lat - a.lat) * kDeg;
  const double dlon = (b.lon - a.lon) * kDeg;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * s2 * s2;
  if (h > 1.0) h = 1.0;
  return 2.0 * std::asin(std::sqrt(h));
}

double normalized_assoc_legendre(int l, int m, double x) {
  if (l < 0 || m < 0 || m > l) {
    throw DomainError("associated Legendre: need 0 <= m <= l, got l=" + std::to_string(l) + " m=" + std::to_string(m));
  }
  if (!(std::abs(x) <= 1.0)) throw DomainError("associated Legendre: |x| > 1");

  // Sectoral seed P(m, m), normalization folded into each factor.
  const double s = std::sqrt((1.0 - x) * (1.0 + x));
  double pmm = 1.0 / std::sqrt(4.0 * kPi);
  for (int i = 1; i <= m; ++i) {
    pmm *= -std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * s;
  }
  if (l == m) return pmm;

  double pm1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
  if (l == m + 1) return pm1;

  double prev_a = std::sqrt(2.0 * m + 3.0);
  double pl = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    const double a = std::sqrt((4.0 * ll * ll - 1.0) / (static_cast<double>(ll) * ll - static_cast<double>(m) * m));
    pl = a * (x * pm1 - pmm / prev_a);
    prev_a = a;
    pmm = pm1;
    pm1 = pl;
  }
  return pl;
}

void sh_basis_angles(double theta, double phi, int l_max, std::span<double> out) {
  if (l_max < 1) throw DomainError("sh_basis: l_max must be >= 1");
  if (out.size() != static_cast<std::size_t>(l_max) * l_max) {
    throw ShapeError("sh_basis: output span has wrong length");
  }
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  const double sqrt2 = std::numbers::sqrt2;

  // Column-by-column recurrence: for each order m walk the degrees upward.
  double pmm = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 0; m < l_max; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    const double cm = m == 0 ? 1.0 : sqrt2 * std::cos(m * phi);
    const double sm = m == 0 ? 0.0 : sqrt2 * std::sin(m * phi);

    auto emit = [&](int l, double p) {
      if (m == 0) {
        out[sh_index(l, 0)] = p;
      } else {
        out[sh_index(l, m)] = p * cm;
        out[sh_index(l, -m)] = p * sm;
      }
    };

    emit(m, pmm);
    if (m + 1 >= l_max) continue;
    double p_prev = pmm;
    double p_cur = x * std::sqrt(2.0 * m + 3.0) * pmm;
    emit(m + 1, p_cur);
    double prev_a = std::sqrt(2.0 * m + 3.0);
    for (int l = m + 2; l < l_max; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double p_next = a * (x * p_cur - p_prev / prev_a);
      prev_a = a;
      p_prev = p_cur;
      p_cur = p_next;
      emit(l, p_cur);
    }
  }
}

void sh_basis_into(const GeoCoordinate& c, int l_max, std::span<double> out) {
  const auto [theta, phi] = to_spherical(c);
  sh_basis_angles(theta, phi, l_max, out);
}

SHEmbedding sh_basis(const GeoCoordinate& c, int l_max) {
  if (l_max < 1) throw DomainError("sh_basis: l_max must be >= 1");
  SHEmbedding e;
  e.l_max = l_max;
  e.values.resize(static_cast<std::size_t>(l_max) * l_max);
  sh_basis_into(c, l_max, e.values);
  return e;
}

Tensor2 sh_basis_batch(std::span<const GeoCoordinate> coords, int l_max) {
  if (l_max < 1) throw DomainError("sh_basis: l_max must be >= 1");
  const Eigen::Index width = static_cast<Eigen::Index>(l_max) * l_max;
  Tensor2 out(static_cast<Eigen::Index>(coords.size()), width);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    sh_basis_into(coords[i], l_max, std::span<double>(out.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(width)));
  }
  return out;
}

}  // namespace locenc
