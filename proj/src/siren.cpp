#include "locenc/siren.hpp"

#include <cmath>
#include <string>

#include "locenc/rng.hpp"

namespace locenc {

void SirenConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || hidden_layers < 1 || output_dim < 1) {
    throw DomainError("SirenConfig: all dimensions and the layer count must be >= 1");
  }
  if (!std::isfinite(omega0) || omega0 <= 0.0) throw DomainError("SirenConfig: omega0 must be positive");
}

Tensor2 DenseLayer::forward(const Tensor2& x) const {
  if (x.cols() != weight.value.rows()) {
    throw ShapeError("dense layer '" + weight.name + "': input " + shape_str(x) + " vs weight " + shape_str(weight.value));
  }
  return affine_rows(x, weight.value, bias.value);
}

Var DenseLayer::forward(Tape& tape, Var x) {
  if (x.cols() != weight.value.rows()) {
    throw ShapeError("dense layer '" + weight.name + "': input " + shape_str(x.value()) + " vs weight " +
                     shape_str(weight.value));
  }
  return affine(x, tape.param(weight), tape.param(bias));
}

std::vector<Parameter*> LocationEncoder::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> LocationEncoder::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::size_t LocationEncoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

namespace {

DenseLayer uniform_layer(const std::string& name, int fan_in, int fan_out, double bound, Rng& rng) {
  Tensor2 w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  DenseLayer layer;
  layer.weight = Parameter(name + ".weight", std::move(w));
  layer.bias = Parameter(name + ".bias", Tensor2::Zero(1, fan_out));
  layer.weight.zero_grad();
  layer.bias.zero_grad();
  return layer;
}

}  // namespace

LocationEncoder siren_init(const SirenConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  LocationEncoder enc;
  enc.config = config;
  int fan_in = config.input_dim;
  for (int i = 0; i < config.hidden_layers; ++i) {
    const double bound = i == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / config.omega0;
    enc.layers.push_back(uniform_layer("encoder.sine" + std::to_string(i), fan_in, config.hidden_dim, bound, rng));
    fan_in = config.hidden_dim;
  }
  enc.layers.push_back(uniform_layer("encoder.out", fan_in, config.output_dim, std::sqrt(6.0 / fan_in), rng));
  return enc;
}

Tensor2 siren_forward(const LocationEncoder& enc, const Tensor2& x) {
  if (x.cols() != enc.config.input_dim) {
    throw ShapeError("siren_forward: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                     std::to_string(enc.config.input_dim));
  }
  const double w0 = enc.config.omega0;
  Tensor2 h = x;
  for (std::size_t i = 0; i + 1 < enc.layers.size(); ++i) {
    h = (enc.layers[i].forward(h) * w0).array().sin().matrix();
  }
  return enc.layers.back().forward(h);
}

Var siren_forward(Tape& tape, LocationEncoder& enc, Var x) {
  if (x.cols() != enc.config.input_dim) {
    throw ShapeError("siren_forward: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                     std::to_string(enc.config.input_dim));
  }
  const double w0 = enc.config.omega0;
  Var h = x;
  for (std::size_t i = 0; i + 1 < enc.layers.size(); ++i) {
    auto& l = enc.layers[i];
    if (h.cols() != l.weight.value.rows()) {
      throw ShapeError("dense layer '" + l.weight.name + "': input " + shape_str(h.value()) + " vs weight " +
                       shape_str(l.weight.value));
    }
    h = sine_layer(h, tape.param(l.weight), tape.param(l.bias), w0);
  }
  return enc.layers.back().forward(tape, h);
}

}  // namespace locenc
