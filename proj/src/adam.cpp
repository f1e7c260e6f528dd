#include "locenc/adam.hpp"

#include <cmath>
#include <string>

namespace locenc {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !(weight_decay >= 0.0) || !(eps > 0.0)) throw DomainError("Adam: lr, weight_decay must be >= 0 and eps > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("Adam: betas must be in [0, 1)");
}

Adam::Adam(AdamConfig config, std::vector<Parameter*> params) : config_(config), params_(std::move(params)) {
  config_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.push_back(Tensor2::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Tensor2::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double lr = config_.lr;
  const double wd = config_.weight_decay;

  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.frozen) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeError("Adam: gradient of '" + p.name + "' is " + shape_str(p.grad) + ", parameter is " + shape_str(p.value));
    }
    const double decay = p.decay ? wd : 0.0;
    auto theta = p.value.array();
    auto m = m_[k].array();
    auto v = v_[k].array();
    if (config_.decoupled) {
      if (decay != 0.0) theta -= lr * decay * theta;
      m = config_.beta1 * m + (1.0 - config_.beta1) * p.grad.array();
      v = config_.beta2 * v + (1.0 - config_.beta2) * p.grad.array().square();
    } else {
      const Tensor2 g = p.grad + decay * p.value;
      m = config_.beta1 * m + (1.0 - config_.beta1) * g.array();
      v = config_.beta2 * v + (1.0 - config_.beta2) * g.array().square();
    }
    theta -= lr * (m / bc1) / ((v / bc2).sqrt() + config_.eps);
  }
}

}  // namespace locenc
