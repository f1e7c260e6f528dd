#include "locenc/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace locenc {

namespace fs = std::filesystem;

int encoder_l_max(const LocationEncoder& enc) {
  const int d = enc.config.input_dim;
  const int l = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  if (l < 1 || l * l != d) throw DomainError("encoder input dimension " + std::to_string(d) + " is not a perfect square");
  return l;
}

int Checkpoint::l_max() const { return encoder_l_max(encoder); }

namespace {

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void tensor(const Tensor2& t) {
    u32(static_cast<std::uint32_t>(t.rows()));
    u32(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) f64(t.data()[i]);
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  Tensor2 tensor(Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    const auto r = u32();
    const auto c = u32();
    if (r != rows || c != cols) {
      throw FormatError("checkpoint tensor '" + what + "' has shape " + std::to_string(r) + "x" + std::to_string(c) +
                        ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    need(static_cast<std::size_t>(r) * c * 8);
    Tensor2 t(rows, cols);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = f64();
    if (!t.allFinite()) throw FormatError("checkpoint tensor '" + what + "' has non-finite values");
    return t;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  const char* at() const { return buf_.data() + pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::size_t encoder_tensor_count(const SirenConfig& c) { return 2 * static_cast<std::size_t>(c.hidden_layers + 1); }

}  // namespace

void save_checkpoint(const fs::path& path, const LocationEncoder& encoder, const ImageProjection* projection,
                     const Temperature* temperature) {
  if (temperature != nullptr && projection == nullptr) throw DomainError("save_checkpoint: temperature requires a projection");
  if (projection != nullptr && projection->dim() != encoder.config.output_dim) {
    throw ShapeError("save_checkpoint: projection dim does not match encoder output dim");
  }
  const auto& c = encoder.config;
  Writer w;
  w.bytes(kCheckpointMagic, 5);
  w.u32(static_cast<std::uint32_t>(c.input_dim));
  w.u32(static_cast<std::uint32_t>(c.hidden_dim));
  w.u32(static_cast<std::uint32_t>(c.hidden_layers));
  w.u32(static_cast<std::uint32_t>(c.output_dim));
  w.f64(c.omega0);
  std::size_t count = encoder_tensor_count(c) + (projection ? 2 : 0) + (temperature ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(count));
  for (const auto& l : encoder.layers) {
    w.tensor(l.weight.value);
    w.tensor(l.bias.value);
  }
  if (projection) {
    w.tensor(projection->weight.value);
    w.tensor(projection->bias.value);
  }
  if (temperature) w.tensor(temperature->parameter().value);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  r.need(5);
  if (std::memcmp(r.at(), kCheckpointMagic, 5) != 0) {
    if (std::memcmp(r.at(), "LENC", 4) == 0) throw FormatError("unsupported checkpoint version");
    throw FormatError("not a location-encoder checkpoint (bad magic)");
  }
  r.skip(5);

  SirenConfig c;
  c.input_dim = static_cast<int>(r.u32());
  c.hidden_dim = static_cast<int>(r.u32());
  c.hidden_layers = static_cast<int>(r.u32());
  c.output_dim = static_cast<int>(r.u32());
  c.omega0 = r.f64();
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (c.hidden_layers > 1024 || c.hidden_dim > (1 << 20) || c.input_dim > (1 << 20) || c.output_dim > (1 << 20)) {
    throw FormatError("checkpoint config has implausible dimensions");
  }
  const std::size_t count = r.u32();
  const std::size_t enc_count = encoder_tensor_count(c);
  if (count != enc_count && count != enc_count + 2 && count != enc_count + 3) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, expected " + std::to_string(enc_count) +
                      ", " + std::to_string(enc_count + 2) + " or " + std::to_string(enc_count + 3));
  }

  Checkpoint ck;
  ck.encoder.config = c;
  int fan_in = c.input_dim;
  for (int i = 0; i <= c.hidden_layers; ++i) {
    const bool out_layer = i == c.hidden_layers;
    const std::string name = out_layer ? "encoder.out" : "encoder.sine" + std::to_string(i);
    const int fan_out = out_layer ? c.output_dim : c.hidden_dim;
    DenseLayer layer;
    layer.weight = Parameter(name + ".weight", r.tensor(fan_in, fan_out, name + ".weight"));
    layer.bias = Parameter(name + ".bias", r.tensor(1, fan_out, name + ".bias"));
    layer.weight.zero_grad();
    layer.bias.zero_grad();
    ck.encoder.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  if (count >= enc_count + 2) {
    // k_img is not in the header; peek at the stored row count.
    r.need(4);
    std::uint32_t k = 0;
    for (int i = 0; i < 4; ++i) k |= static_cast<std::uint32_t>(static_cast<unsigned char>(r.at()[i])) << (8 * i);
    if (k == 0 || k > (1u << 20)) throw FormatError("checkpoint projection has implausible input dimension");
    ImageProjection p;
    p.weight = Parameter("projection.weight", r.tensor(k, c.output_dim, "projection.weight"));
    p.bias = Parameter("projection.bias", r.tensor(1, c.output_dim, "projection.bias"));
    p.weight.zero_grad();
    p.bias.zero_grad();
    ck.projection = std::move(p);
  }
  if (count == enc_count + 3) {
    const Tensor2 lt = r.tensor(1, 1, "temperature.log_tau");
    const double tau = std::exp(lt(0, 0));
    if (!(tau >= Temperature::kMin * (1 - 1e-12) && tau <= Temperature::kMax * (1 + 1e-12))) {
      throw FormatError("checkpoint temperature out of bounds");
    }
    Temperature t(std::clamp(tau, Temperature::kMin, Temperature::kMax));
    t.parameter().value = lt;
    ck.temperature = std::move(t);
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  return ck;
}

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".json";
  return p;
}

void write_sidecar(const fs::path& checkpoint, const nlohmann::json& meta) {
  std::ofstream out(sidecar_path(checkpoint), std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + sidecar_path(checkpoint).string() + "'");
  out << meta.dump(2) << '\n';
}

nlohmann::json read_sidecar(const fs::path& checkpoint) {
  std::ifstream in(sidecar_path(checkpoint), std::ios::binary);
  if (!in) throw IoError("cannot open '" + sidecar_path(checkpoint).string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint sidecar: ") + e.what());
  }
}

}  // namespace locenc
