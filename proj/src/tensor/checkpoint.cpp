#include "surfer/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::tensor {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t take(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::string take_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint truncated");
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamStore& params) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    put_u64(out, offset);
    offset += t.size() * sizeof(float);
  }
  for (const auto& [_, t] : params.entries()) {
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ParamStore decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take_string(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw ConfigError("not a checkpoint file (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(in.take(4));
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = static_cast<std::uint32_t>(in.take(4));
  struct Record {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset;
  };
  std::vector<Record> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r;
    r.name = in.take_string(static_cast<std::size_t>(in.take(4)));
    const auto rank = static_cast<std::uint32_t>(in.take(4));
    if (rank != 2) throw ConfigError("checkpoint record '" + r.name + "' has unsupported rank");
    for (std::uint32_t d = 0; d < rank; ++d) r.shape.push_back(static_cast<std::size_t>(in.take(8)));
    r.offset = in.take(8);
    records.push_back(std::move(r));
  }
  const std::size_t payload = in.pos();
  ParamStore store;
  for (const Record& r : records) {
    const std::size_t n = r.shape[0] * r.shape[1];
    if (payload + r.offset + n * sizeof(float) > bytes.size()) throw ConfigError("checkpoint payload truncated");
    std::vector<double> data(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::uint32_t raw = 0;
      const std::size_t at = payload + r.offset + j * sizeof(float);
      for (int b = 0; b < 4; ++b)
        raw |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
      data[j] = static_cast<double>(std::bit_cast<float>(raw));
    }
    store.add(r.name, Tensor(r.shape[0], r.shape[1], std::move(data)));
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  write_file(path, encode_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace surfer::tensor
