#include "segattack/serialize.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "segattack/common.hpp"

namespace segattack {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'G', 'T', 'K', '0', '0', '0', '1'};
constexpr char kTensorMagic[8] = {'S', 'G', 'T', 'T', '0', '0', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.good(), "truncated container");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_doubles(std::ostream& out, const Scalar* p, std::size_t n) {
  // doubles written as their IEEE-754 bit pattern, little endian
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    put_u64(out, bits);
  }
}

void get_doubles(std::istream& in, Scalar* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = get_u64(in);
    std::memcpy(&p[i], &bits, 8);
  }
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u64(out, t.rank());
  for (std::size_t d = 0; d < t.rank(); ++d) put_u64(out, t.dim(d));
  put_doubles(out, t.data(), t.size());
}

Tensor get_tensor(std::istream& in) {
  std::size_t rank = get_u64(in);
  require(rank <= 8, "implausible tensor rank in container");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = get_u64(in);
  Tensor t(shape);
  get_doubles(in, t.data(), t.size());
  return t;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, 8);
  put_u64(out, manifest_json.size());
  out.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));
  put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_tensor(out, t);
  }
  require(out.good(), "short write: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "not a checkpoint file: " + path.string());
  Checkpoint ck;
  std::size_t mlen = get_u64(in);
  ck.manifest_json.resize(mlen);
  in.read(ck.manifest_json.data(), static_cast<std::streamsize>(mlen));
  std::size_t count = get_u64(in);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t nlen = get_u64(in);
    std::string name(nlen, '\0');
    in.read(name.data(), static_cast<std::streamsize>(nlen));
    require(in.good(), "truncated checkpoint: " + path.string());
    ck.tensors.emplace_back(std::move(name), get_tensor(in));
  }
  return ck;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  fail("checkpoint has no tensor named " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write tensor: " + path.string());
  out.write(kTensorMagic, 8);
  put_tensor(out, t);
  require(out.good(), "short write: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open tensor: " + path.string());
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kTensorMagic, 8) == 0,
          "not a tensor file: " + path.string());
  return get_tensor(in);
}

}  // namespace segattack
