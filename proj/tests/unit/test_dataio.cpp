#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "locenc/dataset.hpp"
#include "locenc/split.hpp"
#include "locenc/synthetic.hpp"

using namespace locenc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "locenc_test_dataio";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<GeoCoordinate> random_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GeoCoordinate> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sphere_point(rng));
  return out;
}

void check_partition(const SplitIndices& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    for (auto i : *part) {
      REQUIRE(i < n);
      ++seen[i];
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

}  // namespace

TEST_CASE("generate_world") {
  SyntheticWorldSpec spec;
  spec.seed = 11;

  SUBCASE("area-uniform sampling matches the cap-area fraction") {
    const auto pts = random_points(100000, 5);
    std::size_t polar = 0;
    for (const auto& c : pts) polar += std::abs(c.lat) > 60.0;
    const double expect = 1.0 - std::sin(std::numbers::pi / 3.0);
    CHECK(std::abs(static_cast<double>(polar) / 1e5 - expect) < 0.01);
  }
  SUBCASE("same seed, same world") {
    const auto a = generate_world(spec, 500);
    const auto b = generate_world(spec, 500);
    CHECK(a.pairs.features == b.pairs.features);
    CHECK(a.labels.targets == b.labels.targets);
    for (std::size_t i = 0; i < 500; ++i) CHECK((a.pairs.coords[i].lon == b.pairs.coords[i].lon && a.pairs.coords[i].lat == b.pairs.coords[i].lat));
    spec.seed = 12;
    CHECK(generate_world(spec, 500).pairs.features != a.pairs.features);
  }
  SUBCASE("narrow bump without noise reproduces the mixing row") {
    SyntheticWorldSpec s = spec;
    s.noise_sigma = 0.0;
    s.width = 1e-3;
    const auto r = s.resolved();
    for (int j = 0; j < r.bump_count; ++j) {
      const auto a = bump_activations(r, r.centers[j]);
      RowVector f = RowVector::Zero(r.feature_dim);
      for (int b = 0; b < r.bump_count; ++b) f += a[b] * r.mixing.row(b);
      CHECK((f - r.mixing.row(j)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("bumps of one type share a prototype, types differ") {
    SyntheticWorldSpec s = spec;
    s.type_count = 4;
    s.type_spread = 0.1;
    const auto r = s.resolved();
    CHECK(Eigen::ColPivHouseholderQR<Tensor2>(r.mixing).rank() == r.bump_count);
    double same = 0.0, other = 1e300;
    for (int i = 0; i < r.bump_count; ++i) {
      for (int j = i + 1; j < r.bump_count; ++j) {
        const double d = (r.mixing.row(i) - r.mixing.row(j)).norm();
        if (i % 4 == j % 4) same = std::max(same, d);
        else other = std::min(other, d);
      }
    }
    CHECK(same < 0.1 * 2.0 * std::sqrt(2.0 * r.feature_dim));
    CHECK(other > same);

    SyntheticWorldSpec flat = spec;
    flat.type_count = 0;
    flat.type_spread = 0.1;
    const auto f = flat.resolved();
    CHECK((f.mixing.row(4) - f.mixing.row(0)).norm() > 1.0);

    SyntheticWorldSpec one = spec;
    one.type_count = 1;
    one.type_spread = 0.0;
    CHECK_THROWS_AS(one.resolved(), DomainError);
  }
  SUBCASE("targets are the readout of the activations; readout has unit norm") {
    const auto w = generate_world(spec, 50);
    double norm2 = 0.0;
    for (double v : w.spec.readout) norm2 += v * v;
    CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 50; ++i) {
      const auto a = bump_activations(w.spec, w.labels.coords[i]);
      double t = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) t += w.spec.readout[j] * a[j];
      CHECK(w.labels.targets[i] == doctest::Approx(t).epsilon(1e-14));
    }
  }
  SUBCASE("features are spatially smooth") {
    const auto w = spec.resolved();
    Rng rng(3);
    auto feature = [&](const GeoCoordinate& c) {
      const auto a = bump_activations(w, c);
      RowVector f = RowVector::Zero(w.feature_dim);
      for (int b = 0; b < w.bump_count; ++b) f += a[b] * w.mixing.row(b);
      for (int k = 0; k < w.feature_dim; ++k) f[k] += w.noise_sigma * standard_normal(rng);
      return f;
    };
    double near = 0.0, far = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
      const GeoCoordinate p = random_sphere_point(rng);
      // Second point at a random bearing, less than width/4 away.
      const double dist = uniform(rng, 0.0, w.width / 4.0);
      const double bearing = uniform(rng, 0.0, 2 * std::numbers::pi);
      const double lat1 = p.lat * std::numbers::pi / 180, lon1 = p.lon * std::numbers::pi / 180;
      const double lat2 = std::asin(std::sin(lat1) * std::cos(dist) + std::cos(lat1) * std::sin(dist) * std::cos(bearing));
      const double lon2 = lon1 + std::atan2(std::sin(bearing) * std::sin(dist) * std::cos(lat1),
                                            std::cos(dist) - std::sin(lat1) * std::sin(lat2));
      const auto q = GeoCoordinate::make(lon2 * 180 / std::numbers::pi, lat2 * 180 / std::numbers::pi);
      CHECK(angular_distance(p, q) <= w.width / 4.0 + 1e-9);
      near += (feature(p) - feature(q)).norm();
      far += (feature(p) - feature(random_sphere_point(rng))).norm();
    }
    CHECK(far >= 2.0 * near);
  }
  SUBCASE("spec validation and JSON") {
    SyntheticWorldSpec bad = spec;
    bad.width = 0.0;
    CHECK_THROWS_AS(generate_world(bad, 10), DomainError);
    CHECK_THROWS_AS(generate_world(spec, 1), DomainError);
    const auto r = spec.resolved();
    const auto back = SyntheticWorldSpec::from_json(r.to_json());
    CHECK(back.mixing == r.mixing);
    CHECK(back.readout == r.readout);
    CHECK(back.seed == r.seed);
    CHECK(back.type_count == r.type_count);
    CHECK(back.type_spread == r.type_spread);
    CHECK(generate_world(back, 100).pairs.features == generate_world(spec, 100).pairs.features);
    auto j = r.to_json();
    j["surprise"] = 1;
    CHECK_THROWS(SyntheticWorldSpec::from_json(j));
  }
}

TEST_CASE("jitter") {
  Rng rng(1);
  SUBCASE("zero width leaves the coordinate unchanged") {
    const auto c = GeoCoordinate::make(12.5, -33.25);
    const auto j = jitter(c, rng, 0.0);
    CHECK(j.lon == c.lon);
    CHECK(j.lat == c.lat);
  }
  SUBCASE("equator displacement within the box diagonal") {
    const auto c = GeoCoordinate::make(30.0, 0.0);
    const double diag = haversine_km(c, GeoCoordinate::make(30.009, 0.009));
    CHECK(diag == doctest::Approx(1.4153).epsilon(1e-3));
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) worst = std::max(worst, haversine_km(c, jitter(c, rng)));
    CHECK(worst <= diag + 1e-9);
    CHECK(worst <= 1.42);
  }
  SUBCASE("near the pole the latitude stays valid") {
    for (int i = 0; i < 1000; ++i) {
      const auto j = jitter(GeoCoordinate::make(10.0, 89.9999), rng);
      CHECK(j.lat <= 90.0);
      CHECK(j.lat >= 89.9);
    }
    CHECK(jitter(GeoCoordinate::make(10.0, 89.9), rng).lat <= 90.0);
  }
  SUBCASE("never more than 1.5 km up to 85 degrees latitude") {
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const auto c = GeoCoordinate::make(uniform(rng, -180.0, 180.0), uniform(rng, -85.0, 85.0));
      worst = std::max(worst, haversine_km(c, jitter(c, rng)));
    }
    CHECK(worst <= 1.5);
  }
  SUBCASE("wraps across the antimeridian") {
    const auto j = jitter(GeoCoordinate::make(179.9999, 0.0), rng, 0.009);
    CHECK(j.lon >= -180.0);
    CHECK(j.lon < 180.0);
  }
}

TEST_CASE("split") {
  SUBCASE("random 0.9/0.1/0 on 1000 points") {
    const auto pts = random_points(1000, 1);
    const auto s = split(pts, SplitSpec::random_split(0.9, 0.1, 0.0), 7);
    CHECK(s.train.size() == 900);
    CHECK(s.val.size() == 100);
    CHECK(s.test.empty());
    check_partition(s, 1000);
    const auto again = split(pts, SplitSpec::random_split(0.9, 0.1, 0.0), 7);
    CHECK(again.val == s.val);
    CHECK(split(pts, SplitSpec::random_split(0.9, 0.1, 0.0), 8).val != s.val);
  }
  SUBCASE("region holdout without leakage") {
    const auto pts = random_points(3000, 2);
    const auto s = split(pts, SplitSpec::holdout(0.0, 60.0), 3);
    check_partition(s, pts.size());
    std::set<std::size_t> test(s.test.begin(), s.test.end());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const bool inside = pts[i].lon >= 0.0 && pts[i].lon < 60.0;
      CHECK(inside == (test.count(i) == 1));
    }
  }
  SUBCASE("fewshot 1% of 10^4 holdout points") {
    std::vector<GeoCoordinate> pts;
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) pts.push_back(GeoCoordinate::make(uniform(rng, 0.0, 60.0), uniform(rng, -80.0, 80.0)));
    for (int i = 0; i < 2000; ++i) pts.push_back(GeoCoordinate::make(uniform(rng, 60.0, 179.0), uniform(rng, -80.0, 80.0)));
    const auto s = split(pts, SplitSpec::holdout(0.0, 60.0, 0.01), 5);
    check_partition(s, pts.size());
    CHECK(s.test.size() == 9900);
    std::size_t leaked = 0;
    for (auto i : s.train) leaked += i < 10000;
    CHECK(leaked == 100);
  }
  SUBCASE("partition property over random specs") {
    const auto pts = random_points(777, 9);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      check_partition(split(pts, SplitSpec::random_split(0.3, 0.1, 0.6), seed), pts.size());
      check_partition(split(pts, SplitSpec::holdout(-30.0, 45.0, 0.05), seed), pts.size());
    }
  }
  SUBCASE("errors and parsing") {
    const auto few = random_points(3, 1);
    CHECK_THROWS_AS(split(few, SplitSpec::random_split(0.3, 0.1, 0.6), 1), DomainError);
    CHECK_THROWS_AS(SplitSpec::random_split(0.5, 0.5, 0.5).validate(), DomainError);
    CHECK_THROWS_AS(SplitSpec::holdout(10.0, 10.0).validate(), DomainError);
    const auto p = SplitSpec::parse("holdout:0,60,0.01");
    CHECK(p.kind == SplitSpec::Kind::region_holdout);
    CHECK(p.lon_hi == 60.0);
    CHECK(p.fewshot_fraction == 0.01);
    CHECK(SplitSpec::parse(p.describe()).fewshot_fraction == 0.01);
    CHECK(SplitSpec::parse("random").train == 0.3);
    CHECK(SplitSpec::parse("random:0.8,0.1,0.1").train == 0.8);
    CHECK_THROWS(SplitSpec::parse("bogus"));
    CHECK(fraction_count(0.01, 10000) == 100);
    CHECK(fraction_count(0.5, 3) == 2);
  }
}

TEST_CASE("dataset files") {
  SyntheticWorldSpec spec;
  spec.seed = 21;
  const auto w = generate_world(spec, 64);

  SUBCASE("pair file round trip is bit-identical") {
    const auto p = scratch("rt.pairs.csv");
    write_pairs_csv(p, w.pairs);
    const auto back = read_pairs_csv(p);
    REQUIRE(back.size() == w.pairs.size());
    CHECK(std::memcmp(back.features.data(), w.pairs.features.data(), sizeof(double) * w.pairs.features.size()) == 0);
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(std::memcmp(&back.coords[i].lon, &w.pairs.coords[i].lon, sizeof(double)) == 0);
      CHECK(std::memcmp(&back.coords[i].lat, &w.pairs.coords[i].lat, sizeof(double)) == 0);
    }
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("lon,lat,f0,f1,", 0) == 0);
  }
  SUBCASE("label file round trip, regression and classification") {
    const auto p = scratch("rt.labels.csv");
    write_labels_csv(p, w.labels);
    const auto back = read_labels_csv(p);
    CHECK(back.kind == TaskKind::regression);
    CHECK(back.targets == w.labels.targets);

    LabeledDataset cls;
    cls.kind = TaskKind::classification;
    cls.coords = {GeoCoordinate::make(1, 2), GeoCoordinate::make(3, 4), GeoCoordinate::make(5, 6)};
    cls.classes = {0, 2, 1};
    cls.class_count = 3;
    write_labels_csv(p, cls);
    const auto c2 = read_labels_csv(p);
    CHECK(c2.kind == TaskKind::classification);
    CHECK(c2.classes == cls.classes);
    CHECK(c2.class_count == 3);
  }
  SUBCASE("NaN row names the line") {
    const auto p = scratch("nan.pairs.csv");
    std::ofstream(p) << "lon,lat,f0,f1\n1,2,0.5,0.5\n3,4,nan,0.5\n";
    try {
      read_pairs_csv(p);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
  SUBCASE("row width disagrees with the header") {
    const auto p = scratch("ragged.pairs.csv");
    std::ofstream(p) << "lon,lat,f0,f1\n1,2,0.5,0.5\n3,4,0.5\n";
    CHECK_THROWS_AS(read_pairs_csv(p), FormatError);
  }
  SUBCASE("malformed header and missing file") {
    const auto p = scratch("bad.pairs.csv");
    std::ofstream(p) << "x,y,f0\n1,2,3\n";
    CHECK_THROWS_AS(read_pairs_csv(p), FormatError);
    CHECK_THROWS_AS(read_pairs_csv(scratch("does-not-exist.csv")), IoError);
  }
}
