#include "locenc/clip.hpp"

#include <cmath>
#include <string>

#include "locenc/rng.hpp"

namespace locenc {

ImageProjection projection_init(int k_img, int dim, std::uint64_t seed) {
  if (k_img < 1 || dim < 1) throw DomainError("projection_init: dimensions must be >= 1");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k_img));
  Tensor2 w(k_img, dim);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  ImageProjection p;
  p.weight = Parameter("projection.weight", std::move(w));
  p.bias = Parameter("projection.bias", Tensor2::Zero(1, dim));
  p.weight.zero_grad();
  p.bias.zero_grad();
  return p;
}

Tensor2 project_images(const ImageProjection& proj, const Tensor2& feats) {
  if (feats.cols() != proj.k_img()) {
    throw ShapeError("project_images: features have " + std::to_string(feats.cols()) + " columns, projection expects " +
                     std::to_string(proj.k_img()));
  }
  return affine_rows(feats, proj.weight.value, proj.bias.value);
}

Var project_images(Tape& tape, ImageProjection& proj, Var feats) {
  if (feats.cols() != proj.k_img()) {
    throw ShapeError("project_images: features have " + std::to_string(feats.cols()) + " columns, projection expects " +
                     std::to_string(proj.k_img()));
  }
  return affine(feats, tape.param(proj.weight), tape.param(proj.bias));
}

Temperature::Temperature(double tau, bool trainable) {
  if (!(tau >= kMin && tau <= kMax)) {
    throw DomainError("temperature " + std::to_string(tau) + " outside [" + std::to_string(kMin) + ", " +
                      std::to_string(kMax) + "]");
  }
  log_tau_ = Parameter("temperature.log_tau", Tensor2::Constant(1, 1, std::log(tau)));
  log_tau_.frozen = !trainable;
  log_tau_.decay = false;
  log_tau_.zero_grad();
}

double Temperature::tau() const { return std::exp(log_tau()); }

void Temperature::clamp() {
  double& lt = log_tau_.value(0, 0);
  lt = std::min(std::max(lt, std::log(kMin)), std::log(kMax));
}

Tensor2 l2_normalize_rows(const Tensor2& x) {
  Tensor2 out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (!std::isfinite(n)) throw NumericalError("l2_normalize_rows: non-finite row " + std::to_string(i));
    if (n < 1e-12) throw DomainError("l2_normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    out.row(i) /= n;
  }
  return out;
}

Tensor2 cosine_similarity(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) throw ShapeError("cosine_similarity: " + shape_str(a) + " vs " + shape_str(b));
  return l2_normalize_rows(a) * l2_normalize_rows(b).transpose();
}

namespace {

void check_batch(const Tensor2& loc, const Tensor2& img) {
  if (loc.rows() != img.rows() || loc.cols() != img.cols()) {
    throw ShapeError("clip_loss: location batch " + shape_str(loc) + " vs image batch " + shape_str(img));
  }
  if (loc.rows() == 0) throw ShapeError("clip_loss: empty batch");
  if (!loc.allFinite() || !img.allFinite()) throw NumericalError("clip_loss: non-finite embeddings");
}

void check_tau(double log_tau) {
  const double tau = std::exp(log_tau);
  // Small slack so a clamped log(tau) never trips the check on round-off.
  if (!(tau >= Temperature::kMin * (1 - 1e-12) && tau <= Temperature::kMax * (1 + 1e-12))) {
    throw DomainError("clip_loss: temperature " + std::to_string(tau) + " out of bounds");
  }
}

}  // namespace

double clip_loss(const EmbeddingBatch& batch, double tau) {
  check_batch(batch.loc, batch.img);
  if (!(tau > 0.0)) throw DomainError("clip_loss: temperature must be positive");
  check_tau(std::log(tau));
  Tape tape;
  Var loc = tape.constant(batch.loc);
  Var img = tape.constant(batch.img);
  Var lt = tape.constant(Tensor2::Constant(1, 1, std::log(tau)));
  return clip_loss(loc, img, lt).item();
}

Var clip_loss(Var loc, Var img, Var log_tau) {
  check_batch(loc.value(), img.value());
  if (log_tau.rows() != 1 || log_tau.cols() != 1) throw ShapeError("clip_loss: log_tau must be 1x1");
  check_tau(log_tau.value()(0, 0));
  Var sim = matmul_nt(l2_normalize_rows(loc), l2_normalize_rows(img));
  Var inv_tau = exp(scale(log_tau, -1.0));
  return symmetric_diagonal_cross_entropy(scale_by(sim, inv_tau));
}

}  // namespace locenc
