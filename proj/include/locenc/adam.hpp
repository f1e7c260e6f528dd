#pragma once

#include <cstdint>
#include <vector>

#include "locenc/autograd.hpp"

namespace locenc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  /// true: theta -= lr * wd * theta before the moment update (AdamW).
  /// false: wd * theta is added to the gradient (classic L2).
  bool decoupled = true;

  void validate() const;
};

/// Adam with bias correction over a fixed set of parameters. Frozen parameters
/// are skipped entirely; parameters with decay == false ignore weight decay.
class Adam {
 public:
  Adam(AdamConfig config, std::vector<Parameter*> params);

  /// Applies one update from each parameter's current grad buffer.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  AdamConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace locenc
