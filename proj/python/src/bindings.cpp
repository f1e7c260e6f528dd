#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "locenc/analysis.hpp"
#include "locenc/checkpoint.hpp"
#include "locenc/clip.hpp"
#include "locenc/downstream.hpp"
#include "locenc/error.hpp"
#include "locenc/pretrain.hpp"
#include "locenc/sphere.hpp"
#include "locenc/synthetic.hpp"

namespace py = pybind11;
using namespace locenc;

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<GeoCoordinate> to_coords(const RowMajor& lonlat) {
  if (lonlat.cols() != 2) throw ShapeError("coordinates must be an (n, 2) array of lon, lat");
  std::vector<GeoCoordinate> out;
  out.reserve(static_cast<std::size_t>(lonlat.rows()));
  for (Eigen::Index i = 0; i < lonlat.rows(); ++i) out.push_back(GeoCoordinate::make(lonlat(i, 0), lonlat(i, 1)));
  return out;
}

RowMajor from_coords(const std::vector<GeoCoordinate>& coords) {
  RowMajor out(static_cast<Eigen::Index>(coords.size()), 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = coords[i].lon;
    out(static_cast<Eigen::Index>(i), 1) = coords[i].lat;
  }
  return out;
}

nlohmann::json to_json(const py::dict& d) {
  auto json_mod = py::module_::import("json");
  return nlohmann::json::parse(json_mod.attr("dumps")(d).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

struct Encoder {
  LocationEncoder encoder;

  RowMajor embed(const RowMajor& lonlat) const {
    const auto coords = to_coords(lonlat);
    return locenc::embed(encoder, coords);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spherical-harmonic Siren location encoders trained contrastively against image features.";
  m.attr("__version__") = LOCENC_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def(
      "sh_basis",
      [](const RowMajor& lonlat, int l_max) {
        const auto coords = to_coords(lonlat);
        return RowMajor(sh_basis_batch(coords, l_max));
      },
      py::arg("coords"), py::arg("l_max"),
      "Real orthonormal spherical harmonics, (n, l_max^2), for (n, 2) lon/lat degrees.");

  m.def("angular_distance",
        [](double lon1, double lat1, double lon2, double lat2) {
          return angular_distance(GeoCoordinate::make(lon1, lat1), GeoCoordinate::make(lon2, lat2));
        });

  m.def(
      "clip_loss",
      [](const RowMajor& loc, const RowMajor& img, double tau) { return clip_loss(EmbeddingBatch{loc, img}, tau); },
      py::arg("loc"), py::arg("img"), py::arg("tau"),
      "Symmetric contrastive loss over a batch of paired embeddings.");

  m.def(
      "generate_world",
      [](std::size_t n, std::uint64_t seed, py::dict overrides) {
        nlohmann::json j = to_json(overrides);
        j["seed"] = seed;
        const auto w = locenc::generate_world(SyntheticWorldSpec::from_json(j), n);
        py::dict out;
        out["coords"] = from_coords(w.pairs.coords);
        out["features"] = RowMajor(w.pairs.features);
        out["targets"] = w.labels.targets;
        out["spec"] = from_json(w.spec.to_json());
        return out;
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("spec") = py::dict(),
      "Synthetic world of n points: coords, image features, regression targets and the resolved spec.");

  py::class_<Encoder>(m, "Encoder")
      .def_static(
          "load", [](const std::filesystem::path& p) { return Encoder{load_checkpoint(p).encoder}; }, py::arg("path"))
      .def("save", [](const Encoder& e, const std::filesystem::path& p) { save_checkpoint(p, e.encoder); })
      .def("embed", &Encoder::embed, py::arg("coords"))
      .def_property_readonly("l_max", [](const Encoder& e) { return encoder_l_max(e.encoder); })
      .def_property_readonly("dim", [](const Encoder& e) { return e.encoder.config.output_dim; })
      .def_property_readonly("parameter_count", [](const Encoder& e) { return e.encoder.parameter_count(); });

  m.def(
      "pretrain",
      [](const RowMajor& lonlat, const RowMajor& features, py::dict config,
         std::function<bool(py::dict)> on_epoch) {
        PairDataset pairs{to_coords(lonlat), features};
        const PretrainConfig cfg = PretrainConfig::from_json(to_json(config));
        EpochCallback cb;
        if (on_epoch) {
          cb = [&](const EpochRecord& r) {
            py::dict d;
            d["epoch"] = r.epoch;
            d["train_loss"] = r.train_loss;
            d["val_loss"] = r.val_loss;
            d["tau"] = r.tau;
            return on_epoch(d);
          };
        }
        PretrainResult res = locenc::pretrain(pairs, cfg, cb);
        py::list log;
        for (const auto& r : res.log.epochs) {
          py::dict d;
          d["epoch"] = r.epoch;
          d["train_loss"] = r.train_loss;
          d["val_loss"] = r.val_loss;
          d["tau"] = r.tau;
          log.append(d);
        }
        py::dict out;
        out["encoder"] = Encoder{res.model.encoder};
        out["log"] = log;
        out["best_epoch"] = res.model.best_epoch;
        out["best_val_loss"] = res.model.best_val_loss;
        out["tau"] = res.model.temperature.tau();
        return out;
      },
      py::arg("coords"), py::arg("features"), py::arg("config") = py::dict(), py::arg("on_epoch") = nullptr,
      "Contrastive pretraining on (coords, features) pairs; config keys follow the pretrain JSON config.");

  m.def(
      "similarity_map",
      [](const Encoder& e, double lon, double lat, double resolution, int threads) {
        const auto g = locenc::similarity_map(e.encoder, GeoCoordinate::make(lon, lat), resolution, threads);
        RowMajor out(g.n_lat, g.n_lon);
        for (int j = 0; j < g.n_lat; ++j)
          for (int i = 0; i < g.n_lon; ++i) out(j, i) = g.at(j, i);
        return out;
      },
      py::arg("encoder"), py::arg("lon"), py::arg("lat"), py::arg("resolution") = 1.0, py::arg("threads") = 1,
      "Cosine similarity to the reference on a global grid; row 0 is the southernmost band.");

  m.def(
      "pca",
      [](const RowMajor& data, int k) {
        const auto r = locenc::pca(data, k);
        py::dict out;
        out["components"] = RowMajor(r.components);
        out["explained_variance_ratio"] = r.explained_variance_ratio;
        out["scores"] = RowMajor(r.projected);
        out["mean"] = Eigen::VectorXd(r.mean.transpose());
        return out;
      },
      py::arg("data"), py::arg("k"));

  m.def(
      "r2", [](const std::vector<double>& pred, const std::vector<double>& truth) { return metric_r2(pred, truth); },
      py::arg("pred"), py::arg("truth"));
}
