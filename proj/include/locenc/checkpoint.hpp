#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "locenc/clip.hpp"
#include "locenc/siren.hpp"

namespace locenc {

/// Binary layout, little-endian:
///   "LENC1"
///   u32 input_dim, u32 hidden_dim, u32 hidden_layers, u32 output_dim, f64 omega0
///   u32 tensor_count
///   tensor_count x (u32 rows, u32 cols, rows*cols f64, row-major)
/// Tensors: encoder layers (weight, bias) in order, then optionally the image
/// projection (weight, bias) and log(tau) as a 1x1 tensor.
struct Checkpoint {
  LocationEncoder encoder;
  std::optional<ImageProjection> projection;
  std::optional<Temperature> temperature;

  int l_max() const;
};

inline constexpr char kCheckpointMagic[] = "LENC1";

void save_checkpoint(const std::filesystem::path& path, const LocationEncoder& encoder,
                     const ImageProjection* projection = nullptr, const Temperature* temperature = nullptr);

/// Validates magic, tensor shapes against the stored config, finiteness, and length.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// JSON metadata stored next to a checkpoint as <path>.json.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
void write_sidecar(const std::filesystem::path& checkpoint, const nlohmann::json& meta);
nlohmann::json read_sidecar(const std::filesystem::path& checkpoint);

/// l_max for an encoder whose input is an l_max^2 spherical-harmonic vector.
int encoder_l_max(const LocationEncoder& enc);

}  // namespace locenc
