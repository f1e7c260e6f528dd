#include "locenc/split.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "locenc/csv.hpp"
#include "locenc/error.hpp"
#include "locenc/rng.hpp"

namespace locenc {

SplitSpec SplitSpec::random_split(double train, double val, double test) {
  SplitSpec s;
  s.kind = Kind::random;
  s.train = train;
  s.val = val;
  s.test = test;
  return s;
}

SplitSpec SplitSpec::holdout(double lon_lo, double lon_hi, double fewshot, double val_fraction) {
  SplitSpec s;
  s.kind = Kind::region_holdout;
  s.lon_lo = lon_lo;
  s.lon_hi = lon_hi;
  s.fewshot_fraction = fewshot;
  s.holdout_val_fraction = val_fraction;
  return s;
}

void SplitSpec::validate() const {
  if (kind == Kind::random) {
    if (train < 0 || val < 0 || test < 0) throw DomainError("split fractions must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw DomainError("split fractions must sum to 1");
  } else {
    if (!(lon_lo < lon_hi)) throw DomainError("holdout interval [lo, hi) must be non-degenerate");
    if (lon_lo < -180.0 || lon_hi > 180.0) throw DomainError("holdout interval must lie within [-180, 180]");
    if (!(fewshot_fraction >= 0.0 && fewshot_fraction <= 1.0)) throw DomainError("fewshot fraction must be in [0, 1]");
    if (!(holdout_val_fraction >= 0.0 && holdout_val_fraction < 1.0)) {
      throw DomainError("holdout validation fraction must be in [0, 1)");
    }
  }
}

std::string SplitSpec::describe() const {
  std::ostringstream os;
  if (kind == Kind::random) {
    os << "random:" << csv::format_double(train) << ',' << csv::format_double(val) << ',' << csv::format_double(test);
  } else {
    os << "holdout:" << csv::format_double(lon_lo) << ',' << csv::format_double(lon_hi) << ','
       << csv::format_double(fewshot_fraction);
  }
  return os.str();
}

SplitSpec SplitSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos) {
    for (auto f : csv::split_fields(std::string_view(text).substr(colon + 1))) {
      args.push_back(csv::parse_double(f, "split '" + text + "'"));
    }
  }
  SplitSpec s;
  if (kind == "random") {
    if (args.empty()) {
      s = random_split(0.3, 0.1, 0.6);
    } else if (args.size() == 3) {
      s = random_split(args[0], args[1], args[2]);
    } else {
      throw DomainError("random split takes three fractions: random:train,val,test");
    }
  } else if (kind == "holdout") {
    if (args.size() != 2 && args.size() != 3) throw DomainError("holdout split format: holdout:lo,hi[,fewshot]");
    s = holdout(args[0], args[1], args.size() == 3 ? args[2] : 0.0);
  } else {
    throw DomainError("unknown split kind '" + kind + "'");
  }
  s.validate();
  return s;
}

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

void require_nonempty(const std::vector<std::size_t>& v, double fraction, const char* name) {
  if (fraction > 0.0 && v.empty()) throw DomainError(std::string("split produced an empty ") + name + " set");
}

}  // namespace

SplitIndices split(std::span<const GeoCoordinate> coords, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = coords.size();
  Rng rng = make_rng(seed, "split");
  SplitIndices out;

  if (spec.kind == SplitSpec::Kind::random) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx, rng);
    const std::size_t n_train = std::min(fraction_count(spec.train, n), n);
    const std::size_t n_val = std::min(fraction_count(spec.val, n), n - n_train);
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                   idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    require_nonempty(out.train, spec.train, "train");
    require_nonempty(out.val, spec.val, "validation");
    require_nonempty(out.test, spec.test, "test");
  } else {
    std::vector<std::size_t> inside, outside;
    for (std::size_t i = 0; i < n; ++i) {
      const double lon = coords[i].lon;
      (lon >= spec.lon_lo && lon < spec.lon_hi ? inside : outside).push_back(i);
    }
    if (inside.empty()) throw DomainError("holdout region " + spec.describe() + " contains no points");
    shuffle(inside, rng);
    const std::size_t n_leak = std::min(fraction_count(spec.fewshot_fraction, inside.size()), inside.size());
    out.test.assign(inside.begin() + static_cast<std::ptrdiff_t>(n_leak), inside.end());

    shuffle(outside, rng);
    const std::size_t n_val = fraction_count(spec.holdout_val_fraction, outside.size());
    out.val.assign(outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.assign(outside.begin() + static_cast<std::ptrdiff_t>(n_val), outside.end());
    out.train.insert(out.train.end(), inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(n_leak));
    if (out.train.empty()) throw DomainError("split produced an empty train set");
    require_nonempty(out.val, spec.holdout_val_fraction, "validation");
    if (out.test.empty()) throw DomainError("split produced an empty test set");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace locenc
