#include "locenc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "locenc/clip.hpp"
#include "locenc/csv.hpp"
#include "locenc/parallel.hpp"
#include "locenc/pretrain.hpp"

namespace locenc {

namespace fs = std::filesystem;

std::vector<GeoCoordinate> SimilarityGrid::cell_centers() const {
  std::vector<GeoCoordinate> out;
  out.reserve(static_cast<std::size_t>(n_lon) * n_lat);
  for (int j = 0; j < n_lat; ++j) {
    for (int i = 0; i < n_lon; ++i) out.push_back(GeoCoordinate{lon_center(i), lat_center(j)});
  }
  return out;
}

namespace {

int whole_count(double span, double resolution) {
  const double q = span / resolution;
  const double r = std::round(q);
  if (!(resolution > 0.0) || std::abs(q - r) > 1e-9 || r < 1) {
    throw DomainError("similarity_map: resolution " + std::to_string(resolution) + " must divide " +
                      std::to_string(span) + " evenly");
  }
  return static_cast<int>(r);
}

}  // namespace

SimilarityGrid similarity_map(const EmbeddingFn& embed_fn, const GeoCoordinate& ref, double resolution, int threads) {
  SimilarityGrid grid;
  grid.reference = ref;
  grid.resolution = resolution;
  grid.n_lon = whole_count(360.0, resolution);
  grid.n_lat = whole_count(180.0, resolution);
  grid.values.assign(static_cast<std::size_t>(grid.n_lon) * grid.n_lat, 0.0);

  const GeoCoordinate ref_arr[] = {ref};
  const Tensor2 ref_emb = l2_normalize_rows(embed_fn(ref_arr));
  const std::vector<GeoCoordinate> centers = grid.cell_centers();

  // Latitude rows are independent; each writes its own slice.
  parallel_for(static_cast<std::size_t>(grid.n_lat), threads, [&](std::size_t j) {
    const std::span<const GeoCoordinate> row(centers.data() + j * static_cast<std::size_t>(grid.n_lon),
                                             static_cast<std::size_t>(grid.n_lon));
    const Tensor2 e = l2_normalize_rows(embed_fn(row));
    const Eigen::VectorXd sims = e * ref_emb.row(0).transpose();
    for (int i = 0; i < grid.n_lon; ++i) {
      // Identical unit vectors can round to 1 - ulp; report them as exactly 1.
      const double v = e.row(i) == ref_emb.row(0) ? 1.0 : std::clamp(sims(i), -1.0, 1.0);
      grid.values[j * static_cast<std::size_t>(grid.n_lon) + static_cast<std::size_t>(i)] = v;
    }
  });
  return grid;
}

SimilarityGrid similarity_map(const LocationEncoder& enc, const GeoCoordinate& ref, double resolution, int threads) {
  return similarity_map([&enc](std::span<const GeoCoordinate> c) { return embed(enc, c); }, ref, resolution, threads);
}

EigenDecomposition jacobi_eigen(const Tensor2& symmetric, double tol, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw ShapeError("jacobi_eigen: matrix must be square");
  Tensor2 a = 0.5 * (symmetric + symmetric.transpose());
  Tensor2 v = Tensor2::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  EigenDecomposition out;

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    }
    return std::sqrt(s);
  };

  for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
    if (off_norm() <= tol * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J on rows/columns p and q.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values.push_back(a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]));
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

PCAResult pca(const Tensor2& data, int k) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 2) throw DomainError("pca: need at least 2 rows");
  if (d < 1 || k < 1 || k > d) throw DomainError("pca: need 1 <= k <= d");
  if (!data.allFinite()) throw NumericalError("pca: non-finite data");

  PCAResult r;
  r.mean = data.colwise().mean();
  const Tensor2 centered = data.rowwise() - r.mean;
  const Tensor2 cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double trace = cov.trace();
  if (!(trace > 0.0)) throw DomainError("pca: data has zero total variance");

  const EigenDecomposition eig = jacobi_eigen(cov);
  r.components.resize(k, d);
  for (int c = 0; c < k; ++c) {
    RowVector comp = eig.vectors.col(c).transpose();
    Eigen::Index arg = 0;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp(arg) < 0.0) comp = -comp;
    r.components.row(c) = comp;
  }
  // Round-off can leave tiny negative eigenvalues for rank-deficient data.
  double total = 0.0;
  for (double ev : eig.values) {
    r.eigenvalues.push_back(std::max(ev, 0.0));
    total += r.eigenvalues.back();
  }
  for (double ev : r.eigenvalues) r.explained_variance_ratio.push_back(ev / total);
  r.projected = centered * r.components.transpose();
  return r;
}

Tensor2 pca_reconstruct(const PCAResult& result) {
  Tensor2 out = result.projected * result.components;
  out.rowwise() += result.mean;
  return out;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_grid_csv(const fs::path& path, const SimilarityGrid& grid) {
  auto out = open_out(path);
  out << "# ref_lon,ref_lat,resolution\n";
  out << "# " << csv::format_double(grid.reference.lon) << ',' << csv::format_double(grid.reference.lat) << ','
      << csv::format_double(grid.resolution) << '\n';
  out << "lon,lat,similarity\n";
  for (int j = 0; j < grid.n_lat; ++j) {
    for (int i = 0; i < grid.n_lon; ++i) {
      out << csv::format_double(grid.lon_center(i)) << ',' << csv::format_double(grid.lat_center(j)) << ','
          << csv::format_double(grid.at(j, i)) << '\n';
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SimilarityGrid read_grid_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!csv::read_line(in, line) || line != "# ref_lon,ref_lat,resolution") throw FormatError(path.string() + ": bad grid header");
  if (!csv::read_line(in, line) || line.rfind("# ", 0) != 0) throw FormatError(path.string() + ": missing grid metadata");
  const auto meta = csv::split_fields(std::string_view(line).substr(2));
  if (meta.size() != 3) throw FormatError(path.string() + ": grid metadata needs 3 values");
  SimilarityGrid g;
  g.reference = GeoCoordinate::make(csv::parse_double(meta[0], path.string()), csv::parse_double(meta[1], path.string()));
  g.resolution = csv::parse_double(meta[2], path.string());
  g.n_lon = whole_count(360.0, g.resolution);
  g.n_lat = whole_count(180.0, g.resolution);
  if (!csv::read_line(in, line) || line != "lon,lat,similarity") throw FormatError(path.string() + ": bad column header");
  std::size_t line_no = 3;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = csv::split_fields(line);
    if (f.size() != 3) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    g.values.push_back(csv::parse_double(f[2], path.string() + ":" + std::to_string(line_no)));
  }
  if (g.values.size() != static_cast<std::size_t>(g.n_lon) * g.n_lat) {
    throw FormatError(path.string() + ": grid has " + std::to_string(g.values.size()) + " cells, expected " +
                      std::to_string(static_cast<std::size_t>(g.n_lon) * g.n_lat));
  }
  return g;
}

void write_pca_csv(const fs::path& path, const PCAResult& result) {
  auto out = open_out(path);
  out << "component_index,explained_variance_ratio\n";
  for (std::size_t i = 0; i < result.explained_variance_ratio.size(); ++i) {
    out << (i + 1) << ',' << csv::format_double(result.explained_variance_ratio[i]) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> read_pca_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!csv::read_line(in, line) || line != "component_index,explained_variance_ratio") {
    throw FormatError(path.string() + ": bad PCA header");
  }
  std::vector<double> ratios;
  while (csv::read_line(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_fields(line);
    if (f.size() != 2) throw FormatError(path.string() + ": expected 2 fields");
    ratios.push_back(csv::parse_double(f[1], path.string()));
  }
  return ratios;
}

void write_scores_csv(const fs::path& path, std::span<const GeoCoordinate> coords, const PCAResult& result) {
  if (static_cast<Eigen::Index>(coords.size()) != result.projected.rows()) {
    throw ShapeError("write_scores_csv: coordinate count does not match score rows");
  }
  auto out = open_out(path);
  out << "lon,lat";
  for (Eigen::Index c = 0; c < result.projected.cols(); ++c) out << ",pc" << (c + 1);
  out << '\n';
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out << csv::format_double(coords[i].lon) << ',' << csv::format_double(coords[i].lat);
    for (Eigen::Index c = 0; c < result.projected.cols(); ++c) {
      out << ',' << csv::format_double(result.projected(static_cast<Eigen::Index>(i), c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace locenc
