#include "locenc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "locenc/error.hpp"

namespace locenc {

using nlohmann::json;

GeoCoordinate random_sphere_point(Rng& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double lon = uniform(rng, -180.0, 180.0);
  const double lat = std::asin(z) * 180.0 / std::numbers::pi;
  return GeoCoordinate{lon, lat};
}

void SyntheticWorldSpec::validate() const {
  if (bump_count < 1) throw DomainError("world spec: bump_count must be >= 1");
  if (feature_dim < 1) throw DomainError("world spec: feature_dim must be >= 1");
  if (!(width > 0.0) || !std::isfinite(width)) throw DomainError("world spec: width must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw DomainError("world spec: noise_sigma must be >= 0");
  if (type_count < 0) throw DomainError("world spec: type_count must be >= 0");
  if (!(type_spread >= 0.0) || !std::isfinite(type_spread)) throw DomainError("world spec: type_spread must be >= 0");
  if (type_count > 0 && type_count < bump_count && type_spread == 0.0 && mixing.size() == 0) {
    throw DomainError("world spec: repeated types need type_spread > 0 for a full-rank mixing matrix");
  }
  if (bump_count > feature_dim) {
    throw DomainError("world spec: mixing matrix cannot have full row rank with bump_count > feature_dim");
  }
  if (!centers.empty() && centers.size() != static_cast<std::size_t>(bump_count)) {
    throw DomainError("world spec: centers must list bump_count entries");
  }
  if (mixing.size() > 0) {
    if (mixing.rows() != bump_count || mixing.cols() != feature_dim) throw DomainError("world spec: mixing has the wrong shape");
    if (!mixing.allFinite()) throw DomainError("world spec: mixing has non-finite entries");
    if (Eigen::ColPivHouseholderQR<Tensor2>(mixing).rank() < bump_count) {
      throw DomainError("world spec: mixing matrix is not full row rank");
    }
  }
  if (!readout.empty()) {
    if (readout.size() != static_cast<std::size_t>(bump_count)) throw DomainError("world spec: readout must have bump_count entries");
    double n2 = 0.0;
    for (double r : readout) n2 += r * r;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-9) throw DomainError("world spec: readout must be unit-norm");
  }
}

SyntheticWorldSpec SyntheticWorldSpec::resolved() const {
  validate();
  SyntheticWorldSpec out = *this;
  if (out.centers.empty()) {
    Rng rng = make_rng(seed, "world.centers");
    for (int j = 0; j < bump_count; ++j) out.centers.push_back(random_sphere_point(rng));
  }
  const int types = type_count > 0 ? std::min(type_count, bump_count) : bump_count;
  const double spread = type_count > 0 ? type_spread : 0.0;
  if (out.mixing.size() == 0) {
    Rng rng = make_rng(seed, "world.mixing");
    for (;;) {
      Tensor2 proto(types, feature_dim);
      for (Eigen::Index i = 0; i < proto.size(); ++i) proto.data()[i] = standard_normal(rng);
      Tensor2 m(bump_count, feature_dim);
      for (int j = 0; j < bump_count; ++j) {
        for (int k = 0; k < feature_dim; ++k) {
          const double e = spread > 0.0 ? spread * standard_normal(rng) : 0.0;
          m(j, k) = proto(j % types, k) + e;
        }
      }
      if (Eigen::ColPivHouseholderQR<Tensor2>(m).rank() == bump_count) {
        out.mixing = std::move(m);
        break;
      }
    }
  }
  if (out.readout.empty()) {
    Rng rng = make_rng(seed, "world.readout");
    double n2 = 0.0;
    while (n2 < 1e-12) {
      std::vector<double> proto(static_cast<std::size_t>(types));
      for (auto& q : proto) q = standard_normal(rng);
      out.readout.assign(static_cast<std::size_t>(bump_count), 0.0);
      n2 = 0.0;
      for (int j = 0; j < bump_count; ++j) {
        double& r = out.readout[static_cast<std::size_t>(j)];
        r = proto[static_cast<std::size_t>(j % types)] + (spread > 0.0 ? spread * standard_normal(rng) : 0.0);
        n2 += r * r;
      }
    }
    const double n = std::sqrt(n2);
    for (auto& r : out.readout) r /= n;
  }
  return out;
}

json SyntheticWorldSpec::to_json() const {
  json j;
  j["bump_count"] = bump_count;
  j["width"] = width;
  j["type_count"] = type_count;
  j["type_spread"] = type_spread;
  j["feature_dim"] = feature_dim;
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  if (!centers.empty()) {
    json cs = json::array();
    for (const auto& c : centers) cs.push_back({c.lon, c.lat});
    j["centers"] = cs;
  }
  if (mixing.size() > 0) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < mixing.rows(); ++i) {
      rows.push_back(std::vector<double>(mixing.row(i).data(), mixing.row(i).data() + mixing.cols()));
    }
    j["mixing"] = rows;
  }
  if (!readout.empty()) j["readout"] = readout;
  return j;
}

SyntheticWorldSpec SyntheticWorldSpec::from_json(const json& j) {
  if (!j.is_object()) throw DomainError("world spec JSON must be an object");
  static const char* known[] = {"bump_count", "width", "type_count", "type_spread", "feature_dim", "noise_sigma", "seed", "centers", "mixing", "readout"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw DomainError("world spec JSON: unknown field '" + key + "'");
    }
  }
  SyntheticWorldSpec s;
  try {
    s.bump_count = j.value("bump_count", s.bump_count);
    s.width = j.value("width", s.width);
    s.type_count = j.value("type_count", s.type_count);
    s.type_spread = j.value("type_spread", s.type_spread);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    if (j.contains("centers")) {
      for (const auto& c : j.at("centers")) {
        s.centers.push_back(GeoCoordinate::make(c.at(0).get<double>(), c.at(1).get<double>()));
      }
    }
    if (j.contains("mixing")) {
      const auto& rows = j.at("mixing");
      const auto r = static_cast<Eigen::Index>(rows.size());
      const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
      s.mixing.resize(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows.at(static_cast<std::size_t>(i)).size()) != c) {
          throw DomainError("world spec JSON: ragged mixing matrix");
        }
        for (Eigen::Index k = 0; k < c; ++k) {
          s.mixing(i, k) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
        }
      }
    }
    if (j.contains("readout")) s.readout = j.at("readout").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DomainError(std::string("world spec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<double> bump_activations(const SyntheticWorldSpec& spec, const GeoCoordinate& c) {
  if (spec.centers.size() != static_cast<std::size_t>(spec.bump_count)) {
    throw DomainError("bump_activations: spec is not resolved");
  }
  std::vector<double> a(spec.centers.size());
  const double denom = 2.0 * spec.width * spec.width;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = angular_distance(c, spec.centers[j]);
    a[j] = std::exp(-d * d / denom);
  }
  return a;
}

double world_target(const SyntheticWorldSpec& spec, const GeoCoordinate& c) {
  const auto a = bump_activations(spec, c);
  if (spec.readout.size() != a.size()) throw DomainError("world_target: spec is not resolved");
  double y = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) y += spec.readout[j] * a[j];
  return y;
}

SyntheticWorld generate_world(const SyntheticWorldSpec& spec, std::size_t n_points) {
  if (n_points < 2) throw DomainError("generate_world: need at least 2 points");
  SyntheticWorld world;
  world.spec = spec.resolved();
  const auto& s = world.spec;

  Rng point_rng = make_rng(s.seed, "world.points");
  Rng noise_rng = make_rng(s.seed, "world.noise");
  const auto n = static_cast<Eigen::Index>(n_points);
  Tensor2 act(n, s.bump_count);
  world.pairs.coords.reserve(n_points);
  world.labels.coords.reserve(n_points);
  world.labels.kind = TaskKind::regression;
  for (Eigen::Index i = 0; i < n; ++i) {
    const GeoCoordinate c = random_sphere_point(point_rng);
    const auto a = bump_activations(s, c);
    double y = 0.0;
    for (int j = 0; j < s.bump_count; ++j) {
      act(i, j) = a[static_cast<std::size_t>(j)];
      y += s.readout[static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)];
    }
    world.pairs.coords.push_back(c);
    world.labels.coords.push_back(c);
    world.labels.targets.push_back(y);
  }
  world.pairs.features = act * s.mixing;
  if (s.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < world.pairs.features.size(); ++i) {
      world.pairs.features.data()[i] += s.noise_sigma * standard_normal(noise_rng);
    }
  }
  return world;
}

}  // namespace locenc
