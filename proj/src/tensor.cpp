#include "v1net/tensor.hpp"

#include <cstring>
#include <fstream>

namespace v1 {

namespace {
constexpr char kMagic[4] = {'V', '1', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T x{};
  is.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!is) throw std::runtime_error("tensor file truncated");
  return x;
}
}  // namespace

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) write_pod(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.v.data()),
           static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a tensor container: " + path.string());
  auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("unsupported tensor version");
  auto ndim = read_pod<std::uint32_t>(is);
  if (ndim == 0 || ndim > 8) throw std::runtime_error("bad tensor rank");
  std::vector<int> shape(ndim);
  for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  if (!is) throw std::runtime_error("tensor file truncated");
  return t;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

}  // namespace v1
