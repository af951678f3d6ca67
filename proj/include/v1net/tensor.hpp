#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace v1 {

// Dense row-major float tensor. Shapes are small so we keep them as plain ints.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(numel(shape), 0.0f);
  }

  static std::size_t numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor dim must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return v.size(); }
  float* data() { return v.data(); }
  const float* data() const { return v.data(); }

  int dim(int i) const { return shape.at(i); }
};

// Versioned binary tensor container (magic "V1TN", little-endian f32 payload).
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// FNV-1a over raw bytes; used for fixed-weight checksums and manifests.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace v1
