#pragma once

#include <cstdint>
#include <vector>

#include "locenc/autograd.hpp"

namespace locenc {

struct SirenConfig {
  int input_dim = 100;    // l_max^2
  int hidden_dim = 512;
  int hidden_layers = 2;  // number of sine layers
  int output_dim = 256;
  double omega0 = 30.0;

  void validate() const;
  friend bool operator==(const SirenConfig&, const SirenConfig&) = default;
};

/// y = x W + b, with W stored fan_in x fan_out.
struct DenseLayer {
  Parameter weight;
  Parameter bias;  // 1 x fan_out

  Tensor2 forward(const Tensor2& x) const;
  Var forward(Tape& tape, Var x);
};

/// Sine layers followed by one linear output layer:
/// h1 = sin(w0 (x W1 + b1)), hk = sin(w0 (h_{k-1} Wk + bk)), out = h W_out + b_out.
struct LocationEncoder {
  SirenConfig config;
  std::vector<DenseLayer> layers;  // hidden_layers sine layers, then the output layer

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
};

LocationEncoder siren_init(const SirenConfig& config, std::uint64_t seed);

/// Inference pass, no tape.
Tensor2 siren_forward(const LocationEncoder& enc, const Tensor2& x);

/// Differentiable pass recorded on `tape`.
Var siren_forward(Tape& tape, LocationEncoder& enc, Var x);

}  // namespace locenc
