#include "aif/checkpoint.hpp"

#include <cstdint>
#include <cstring>

#include "aif/errors.hpp"
#include "aif/io.hpp"

namespace aif {
namespace {

constexpr char kMagic[] = {'A', 'I', 'F', 'X', '1'};

void put_i32(std::string& out, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  out += static_cast<char>(u & 0xff);
  out += static_cast<char>((u >> 8) & 0xff);
  out += static_cast<char>((u >> 16) & 0xff);
  out += static_cast<char>((u >> 24) & 0xff);
}

void put_f64(std::string& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  for (int shift = 0; shift < 64; shift += 8) {
    out += static_cast<char>((u >> shift) & 0xff);
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::int32_t i32() {
    need(4);
    std::uint32_t u = 0;
    for (int k = 3; k >= 0; --k) {
      u = (u << 8) | static_cast<unsigned char>(bytes_[pos_ + k]);
    }
    pos_ += 4;
    return static_cast<std::int32_t>(u);
  }

  double f64() {
    need(8);
    std::uint64_t u = 0;
    for (int k = 7; k >= 0; --k) {
      u = (u << 8) | static_cast<unsigned char>(bytes_[pos_ + k]);
    }
    pos_ += 8;
    double v;
    std::memcpy(&v, &u, sizeof(v));
    return v;
  }

  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) {
      throw SchemaError(origin_ + ": not an AIFX1 checkpoint");
    }
    pos_ += sizeof(kMagic);
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw SchemaError(origin_ + ": truncated checkpoint");
    }
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParameters& params) {
  config.validate();
  std::string out(kMagic, sizeof(kMagic));
  put_i32(out, config.num_layers);
  put_i32(out, config.num_heads);
  put_i32(out, config.d_model);
  put_i32(out, config.d_ff);
  put_i32(out, config.vocab_size);
  put_i32(out, config.max_seq_len);
  put_i32(out, config.effective_rpe_dim());
  put_i32(out, config.rng_seed);

  // tensor_refs takes a mutable reference; serialization only reads.
  auto& mutable_params = const_cast<EncoderParameters&>(params);
  for (const auto& ref : tensor_refs(mutable_params)) {
    for (std::ptrdiff_t i = 0; i < ref.size; ++i) put_f64(out, ref.data[i]);
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  Reader reader(bytes, path.string());
  reader.expect_magic();

  Checkpoint ckpt;
  ckpt.config.num_layers = reader.i32();
  ckpt.config.num_heads = reader.i32();
  ckpt.config.d_model = reader.i32();
  ckpt.config.d_ff = reader.i32();
  ckpt.config.vocab_size = reader.i32();
  ckpt.config.max_seq_len = reader.i32();
  ckpt.config.rpe_dim = reader.i32();
  ckpt.config.rng_seed = reader.i32();
  ckpt.config.validate();

  ckpt.params = init_parameters(ckpt.config);
  for (auto& ref : tensor_refs(ckpt.params)) {
    for (std::ptrdiff_t i = 0; i < ref.size; ++i) ref.data[i] = reader.f64();
  }
  if (!reader.exhausted()) {
    throw SchemaError(path.string() + ": trailing bytes after tensors");
  }
  return ckpt;
}

}  // namespace aif
