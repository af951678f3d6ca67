#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "v1net/tensor.hpp"

namespace v1 {

enum class CellType : std::uint8_t { Simple = 0, Complex = 1 };

// Parameter ranges follow the sampled RF-property ranges:
// theta [0,180) deg, sf [0.5,11.3] cpd, phase [0,2pi), nx/ny [0.1,1.585].
struct GaborParams {
  float theta = 0.0f;  // preferred orientation, degrees
  float sf = 2.0f;     // peak spatial frequency, cycles/degree
  float phase = 0.0f;  // radians
  float nx = 0.5f;     // envelope extent perpendicular to stripes, wavelengths
  float ny = 0.5f;     // envelope extent along stripes, wavelengths
};

struct ChannelDescriptor {
  CellType cell_type = CellType::Simple;
  GaborParams params;
  int channel_index = 0;
};

struct BankGeometry {
  float ppd = 32.0f;   // pixels per degree (64 px field of view over 2 deg)
  int stride = 2;
  int kernel_size = 25;  // odd
};

// Fixed-weight filter bank. A Complex channel owns a quadrature pair
// (phase, phase + pi/2), so num_kernels = n_simple + 2 * n_complex.
struct FilterBank {
  std::vector<ChannelDescriptor> descriptors;
  std::vector<int> kernel_offset;   // first kernel index per channel
  std::vector<float> kernels2d;     // [num_kernels][k][k], unit L2 each
  std::vector<float> kernels;       // [num_kernels][3][k][k], 2-D kernel / 3
  std::vector<bool> aliasing_flag;  // per kernel: envelope under one pixel
  float ppd = 32.0f;
  int stride = 2;
  int kernel_size = 25;
  int n_simple = 0;
  int n_complex = 0;

  int num_kernels() const { return n_simple + 2 * n_complex; }
  int num_channels() const { return n_simple + n_complex; }
  const float* kernel2d(int j) const {
    return kernels2d.data() +
           static_cast<std::size_t>(j) * kernel_size * kernel_size;
  }
  std::uint64_t checksum() const;
};

// Oriented Gaussian-windowed cosine on a k x k pixel grid, unit L2 norm.
// theta wraps modulo 180 (orientation period). aliasing set when either
// envelope sigma falls below one pixel.
std::vector<float> make_gabor_kernel(const GaborParams& params, float ppd,
                                     int k, bool* aliasing = nullptr);

FilterBank build_filter_bank(const std::vector<ChannelDescriptor>& descriptors,
                             const BankGeometry& geom = {});

// Versioned binary container (header, descriptor records, f32 kernel array).
void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path);
FilterBank load_filter_bank(const std::filesystem::path& path);

// Debug path: one PGM per kernel, min-max scaled.
void dump_kernels_pgm(const FilterBank& bank, const std::filesystem::path& dir,
                      int limit = -1);

}  // namespace v1
