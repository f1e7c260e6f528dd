#include "locenc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "locenc/csv.hpp"
#include "locenc/error.hpp"

namespace locenc {

namespace fs = std::filesystem;

const char* to_string(TaskKind k) { return k == TaskKind::regression ? "regression" : "classification"; }

void PairDataset::validate() const {
  if (coords.size() < 2) throw DomainError("pair dataset needs at least 2 records");
  if (static_cast<std::size_t>(features.rows()) != coords.size()) {
    throw DomainError("pair dataset: " + std::to_string(coords.size()) + " coordinates vs " +
                      std::to_string(features.rows()) + " feature rows");
  }
  if (features.cols() < 1) throw DomainError("pair dataset: image features must have at least one column");
  if (!features.allFinite()) throw DomainError("pair dataset: non-finite image feature");
}

void LabeledDataset::validate() const {
  const std::size_t n = coords.size();
  if (kind == TaskKind::regression) {
    if (targets.size() != n) throw DomainError("labeled dataset: target count does not match coordinates");
    for (double t : targets) {
      if (!std::isfinite(t)) throw DomainError("labeled dataset: non-finite regression target");
    }
  } else {
    if (classes.size() != n) throw DomainError("labeled dataset: class count does not match coordinates");
    if (class_count < 1) throw DomainError("labeled dataset: class_count must be >= 1");
    for (int c : classes) {
      if (c < 0 || c >= class_count) throw DomainError("labeled dataset: class id " + std::to_string(c) + " out of range");
    }
  }
  if (extra.size() > 0 && static_cast<std::size_t>(extra.rows()) != n) {
    throw DomainError("labeled dataset: extra feature rows do not match coordinates");
  }
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

double finite_field(std::string_view f, const fs::path& path, std::size_t line, std::string_view column) {
  const std::string ctx = where(path, line) + " column " + std::string(column);
  const double v = csv::parse_double(f, ctx);
  if (!std::isfinite(v)) throw FormatError(ctx + ": non-finite value");
  return v;
}

GeoCoordinate coord_field(std::string_view lon, std::string_view lat, const fs::path& path, std::size_t line) {
  const double x = finite_field(lon, path, line, "lon");
  const double y = finite_field(lat, path, line, "lat");
  try {
    return GeoCoordinate::make(x, y);
  } catch (const DomainError& e) {
    throw FormatError(where(path, line) + ": " + e.what());
  }
}

void expect_prefix(const std::vector<std::string_view>& header, const fs::path& path) {
  if (header.size() < 2 || header[0] != "lon" || header[1] != "lat") {
    throw FormatError(where(path, 1) + ": header must start with lon,lat");
  }
}

}  // namespace

void write_pairs_csv(const fs::path& path, const PairDataset& data) {
  auto out = open_out(path);
  out << "lon,lat";
  for (int j = 0; j < data.k_img(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << csv::format_double(data.coords[i].lon) << ',' << csv::format_double(data.coords[i].lat);
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      out << ',' << csv::format_double(data.features(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PairDataset read_pairs_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!csv::read_line(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = csv::split_fields(line);
  expect_prefix(header, path);
  const std::size_t k = header.size() - 2;
  if (k == 0) throw FormatError(where(path, 1) + ": no feature columns");
  for (std::size_t j = 0; j < k; ++j) {
    if (header[j + 2] != "f" + std::to_string(j)) {
      throw FormatError(where(path, 1) + ": expected column f" + std::to_string(j) + ", found '" +
                        std::string(header[j + 2]) + "'");
    }
  }
  PairDataset data;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (fields.size() != k + 2) {
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(k + 2) + " fields (k_img=" +
                        std::to_string(k) + "), found " + std::to_string(fields.size()));
    }
    data.coords.push_back(coord_field(fields[0], fields[1], path, line_no));
    for (std::size_t j = 0; j < k; ++j) values.push_back(finite_field(fields[j + 2], path, line_no, header[j + 2]));
  }
  data.features = Eigen::Map<Tensor2>(values.data(), static_cast<Eigen::Index>(data.coords.size()), static_cast<Eigen::Index>(k));
  return data;
}

void write_labels_csv(const fs::path& path, const LabeledDataset& data) {
  data.validate();
  auto out = open_out(path);
  out << "lon,lat," << (data.kind == TaskKind::regression ? "target" : "class");
  for (Eigen::Index j = 0; j < data.extra.cols(); ++j) {
    out << ',' << (static_cast<std::size_t>(j) < data.extra_names.size() ? data.extra_names[static_cast<std::size_t>(j)]
                                                                          : "x" + std::to_string(j));
  }
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << csv::format_double(data.coords[i].lon) << ',' << csv::format_double(data.coords[i].lat) << ',';
    if (data.kind == TaskKind::regression) {
      out << csv::format_double(data.targets[i]);
    } else {
      out << data.classes[i];
    }
    for (Eigen::Index j = 0; j < data.extra.cols(); ++j) {
      out << ',' << csv::format_double(data.extra(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

LabeledDataset read_labels_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!csv::read_line(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = csv::split_fields(line);
  expect_prefix(header, path);
  if (header.size() < 3 || (header[2] != "target" && header[2] != "class")) {
    throw FormatError(where(path, 1) + ": third column must be 'target' or 'class'");
  }
  LabeledDataset data;
  data.kind = header[2] == "target" ? TaskKind::regression : TaskKind::classification;
  const std::size_t extra = header.size() - 3;
  for (std::size_t j = 0; j < extra; ++j) data.extra_names.emplace_back(header[j + 3]);
  std::vector<double> extra_values;
  std::size_t line_no = 1;
  int max_class = -1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    data.coords.push_back(coord_field(fields[0], fields[1], path, line_no));
    if (data.kind == TaskKind::regression) {
      data.targets.push_back(finite_field(fields[2], path, line_no, "target"));
    } else {
      const long long c = csv::parse_int(fields[2], where(path, line_no) + " column class");
      if (c < 0 || c > 1'000'000) throw FormatError(where(path, line_no) + ": class id out of range");
      data.classes.push_back(static_cast<int>(c));
      max_class = std::max(max_class, static_cast<int>(c));
    }
    for (std::size_t j = 0; j < extra; ++j) extra_values.push_back(finite_field(fields[j + 3], path, line_no, header[j + 3]));
  }
  if (data.kind == TaskKind::classification) data.class_count = max_class + 1;
  if (extra > 0) {
    data.extra = Eigen::Map<Tensor2>(extra_values.data(), static_cast<Eigen::Index>(data.coords.size()),
                                     static_cast<Eigen::Index>(extra));
  }
  return data;
}

std::vector<GeoCoordinate> read_coords_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!csv::read_line(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = csv::split_fields(line);
  expect_prefix(header, path);
  std::vector<GeoCoordinate> coords;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(header.size()) + " fields");
    }
    coords.push_back(coord_field(fields[0], fields[1], path, line_no));
  }
  return coords;
}

void write_embeddings_csv(const fs::path& path, std::span<const GeoCoordinate> coords, const Tensor2& values) {
  if (static_cast<std::size_t>(values.rows()) != coords.size()) {
    throw ShapeError("write_embeddings_csv: " + std::to_string(coords.size()) + " coordinates vs " +
                     std::to_string(values.rows()) + " rows");
  }
  auto out = open_out(path);
  out << "lon,lat";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out << ",e" << j;
  out << '\n';
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out << csv::format_double(coords[i].lon) << ',' << csv::format_double(coords[i].lat);
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << csv::format_double(values(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

EmbeddingTable read_embeddings_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!csv::read_line(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = csv::split_fields(line);
  expect_prefix(header, path);
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j + 2] != "e" + std::to_string(j)) {
      throw FormatError(where(path, 1) + ": expected column e" + std::to_string(j));
    }
  }
  EmbeddingTable t;
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    t.coords.push_back(coord_field(fields[0], fields[1], path, line_no));
    for (std::size_t j = 0; j < d; ++j) flat.push_back(finite_field(fields[j + 2], path, line_no, header[j + 2]));
  }
  t.values = Tensor2(static_cast<Eigen::Index>(t.coords.size()), static_cast<Eigen::Index>(d));
  std::copy(flat.begin(), flat.end(), t.values.data());
  return t;
}

GeoCoordinate jitter(const GeoCoordinate& c, Rng& rng, double max_deg) {
  const double dlat = uniform(rng, -max_deg, max_deg);
  const double dlon = uniform(rng, -max_deg, max_deg);
  const double cos_lat = std::cos(c.lat * std::numbers::pi / 180.0);
  const double lat = std::clamp(c.lat + dlat, -90.0, 90.0);
  const double lon = normalize_lon(c.lon + dlon / std::max(cos_lat, 0.1));
  return GeoCoordinate{lon, lat};
}

}  // namespace locenc
