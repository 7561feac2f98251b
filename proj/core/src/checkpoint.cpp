#include "caco/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>

#include "caco/errors.hpp"

namespace caco {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'C', 'O'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f32s(std::span<const double> vs) {
    for (double v : vs) f32(v);
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  void f32s(std::span<double> out, const char* what) {
    need(out.size() * 4, what);
    for (double& v : out) v = static_cast<double>(std::bit_cast<float>(u32(what)));
  }
  bool done() const { return pos_ == bytes_.size(); }
  const std::uint8_t* at() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw CheckpointError(std::string(what) + " too large for checkpoint");
  return static_cast<std::uint32_t>(v);
}

void write_params(Writer& w, const EncoderParams& p) {
  for (const Layer& layer : p.layers) {
    w.f32s(layer.weight.values());
    w.f32s(layer.bias);
  }
}

void read_params(Reader& r, EncoderParams& p,
                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& shapes) {
  for (const auto& [out, in] : shapes) {
    Layer layer{Matrix(out, in), Vector(out, 0.0)};
    r.f32s(layer.weight.values(), "encoder weights");
    r.f32s(layer.bias, "encoder biases");
    p.layers.push_back(std::move(layer));
  }
}

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const MemoryBank& bank = ckpt.bank;
  if (bank.velocity.rows() != bank.entries.rows() || bank.velocity.cols() != bank.entries.cols()) {
    throw ConsistencyError("bank velocity shape differs from entries");
  }
  if (!ckpt.query.same_architecture(ckpt.key)) {
    throw ConsistencyError("query and key encoders differ in architecture");
  }
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(checked_u32(bank.size(), "bank size"));
  w.u32(checked_u32(bank.dim(), "bank dim"));
  w.f32s(bank.entries.values());
  w.f32s(bank.velocity.values());
  w.u32(checked_u32(ckpt.query.layers.size(), "layer count"));
  for (const Layer& layer : ckpt.query.layers) {
    w.u32(checked_u32(layer.weight.rows(), "layer width"));
    w.u32(checked_u32(layer.weight.cols(), "layer width"));
  }
  write_params(w, ckpt.query);
  write_params(w, ckpt.key);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(r.at(), kMagic, 4) != 0) throw CheckpointError("not a caco checkpoint (bad magic)");
  r.skip(4);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("incompatible checkpoint version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t k = r.u32("bank size");
  const std::uint32_t d = r.u32("bank dim");
  if (k == 0 || d == 0) throw CheckpointError("checkpoint has an empty bank");
  const std::size_t cells = static_cast<std::size_t>(k) * d;
  r.need(cells * 8, "bank");

  Checkpoint ckpt;
  ckpt.bank.entries = Matrix(k, d);
  ckpt.bank.velocity = Matrix(k, d);
  r.f32s(ckpt.bank.entries.values(), "bank entries");
  r.f32s(ckpt.bank.velocity.values(), "bank velocity");

  const std::uint32_t layers = r.u32("layer count");
  if (layers == 0) throw CheckpointError("checkpoint has no encoder layers");
  r.need(static_cast<std::size_t>(layers) * 8, "layer shapes");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  std::size_t params = 0;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t out = r.u32("layer shape");
    const std::uint32_t in = r.u32("layer shape");
    if (out == 0 || in == 0) throw CheckpointError("checkpoint has an empty layer");
    if (!shapes.empty() && shapes.back().first != in) {
      throw CheckpointError("checkpoint layer shapes do not chain");
    }
    shapes.emplace_back(out, in);
    params += static_cast<std::size_t>(out) * in + out;
  }
  if (shapes.back().first != d) throw CheckpointError("encoder output dim differs from bank dim");
  r.need(params * 8, "encoder parameters");

  ckpt.query.role = EncoderRole::query;
  ckpt.key.role = EncoderRole::key;
  read_params(r, ckpt.query, shapes);
  read_params(r, ckpt.key, shapes);
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint data");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError("cannot move checkpoint into place at " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void quantize_to_f32(MemoryBank& bank) {
  for (double& x : bank.entries.values()) x = to_f32(x);
  for (double& x : bank.velocity.values()) x = to_f32(x);
}

void quantize_to_f32(EncoderParams& params) {
  for (Layer& layer : params.layers) {
    for (double& x : layer.weight.values()) x = to_f32(x);
    for (double& x : layer.bias) x = to_f32(x);
  }
}

void quantize_to_f32(Checkpoint& ckpt) {
  quantize_to_f32(ckpt.bank);
  quantize_to_f32(ckpt.query);
  quantize_to_f32(ckpt.key);
}

}  // namespace caco
