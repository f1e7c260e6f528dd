#pragma once

#include <cstdint>

#include "locenc/autograd.hpp"

namespace locenc {

/// Trainable linear head that maps precomputed image features into the shared
/// embedding space: feats * W + b, W is k_img x d.
struct ImageProjection {
  Parameter weight;
  Parameter bias;

  int k_img() const { return static_cast<int>(weight.value.rows()); }
  int dim() const { return static_cast<int>(weight.value.cols()); }
};

/// W ~ U(-1/sqrt(k_img), 1/sqrt(k_img)), zero bias.
ImageProjection projection_init(int k_img, int dim, std::uint64_t seed);

Tensor2 project_images(const ImageProjection& proj, const Tensor2& feats);
Var project_images(Tape& tape, ImageProjection& proj, Var feats);

/// Learned softmax temperature, stored as log(tau) and clamped to [kMin, kMax].
class Temperature {
 public:
  static constexpr double kMin = 5e-3;
  static constexpr double kMax = 100.0;

  explicit Temperature(double tau = 0.07, bool trainable = true);

  double tau() const;
  double log_tau() const { return log_tau_.value(0, 0); }
  bool trainable() const { return !log_tau_.frozen; }
  /// Pulls log(tau) back into bounds; call after every optimizer step.
  void clamp();

  Parameter& parameter() { return log_tau_; }
  const Parameter& parameter() const { return log_tau_; }

 private:
  Parameter log_tau_;
};

struct EmbeddingBatch {
  Tensor2 loc;  // N x d, location encoder outputs
  Tensor2 img;  // N x d, projected image features; row i pairs with loc row i
};

/// Unit-norm rows. A row with norm below 1e-12 is a degenerate embedding (DomainError).
Tensor2 l2_normalize_rows(const Tensor2& x);

/// Symmetric contrastive loss, value only.
double clip_loss(const EmbeddingBatch& batch, double tau);

/// Differentiable form. Normalizes both sides, forms S = loc_n img_n^T,
/// scales by exp(-log_tau) and averages the row and column cross-entropies.
Var clip_loss(Var loc, Var img, Var log_tau);

/// Cosine similarity matrix of two embedding sets (rows normalized first).
Tensor2 cosine_similarity(const Tensor2& a, const Tensor2& b);

}  // namespace locenc
