#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "v1net/backend.hpp"
#include "v1net/gabor.hpp"
#include "v1net/rng.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

enum class CorruptionKind {
  GaussianNoise,
  ShotNoise,
  ImpulseNoise,
  Contrast,
  Brightness,
  Pixelate,
  DefocusBlur,
};

constexpr int kNumCorruptionKinds = 7;

std::string corruption_name(CorruptionKind kind);
CorruptionKind corruption_from_name(const std::string& name);  // throws on unknown

// Per-kind severity constants (index 0 = severity 1). Shipped defaults follow
// the usual common-corruptions values scaled for 64 px inputs; all values are
// configuration inputs, overridable from a JSON file.
struct CorruptionLevels {
  std::array<double, 5> gaussian_sigma = {0.08, 0.12, 0.18, 0.26, 0.38};
  std::array<double, 5> shot_photons = {60, 25, 12, 5, 3};
  std::array<double, 5> impulse_rate = {0.03, 0.06, 0.09, 0.17, 0.27};
  std::array<double, 5> contrast_scale = {0.4, 0.3, 0.2, 0.1, 0.05};
  std::array<double, 5> brightness_delta = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::array<double, 5> pixelate_fraction = {0.6, 0.5, 0.4, 0.3, 0.25};
  std::array<double, 5> defocus_radius = {1.0, 1.5, 2.0, 2.5, 3.0};
};

CorruptionLevels load_corruption_levels(const std::filesystem::path& path);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  int severity = 1;  // 1..5; 0 = identity by convention
};

// In-place corruption of a [3,H,W] image in [0,1]; output clamped to [0,1].
void corrupt(float* image, int H, int W, const CorruptionSpec& spec,
             const CorruptionLevels& levels, Rng& rng);

struct RobustnessRow {
  std::string kind;  // "clean" for severity 0
  int severity = 0;
  double top1 = 0.0;
  int n = 0;
};

// Top-1 accuracy per (kind, severity) plus a clean row at severity 0.
// Per-image RNG streams derive from (seed, kind, severity, index) so results
// are independent of evaluation order.
std::vector<RobustnessRow> evaluate_robustness(
    const FilterBank& bank, const Backend& net, const LoadedDataset& data,
    const CorruptionLevels& levels, std::uint64_t seed, int batch_size = 64);

void write_robustness_csv(const std::vector<RobustnessRow>& rows,
                          const std::string& model, std::uint64_t seed,
                          const std::filesystem::path& path);

}  // namespace v1
