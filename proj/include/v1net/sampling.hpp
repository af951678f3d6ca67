#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "v1net/gabor.hpp"

namespace v1 {

// Histogram tables driving the Biological sampling regime. All edges must lie
// inside the RF-parameter ranges; every probability row sums to 1 (1e-9).
struct DistributionTable {
  std::vector<double> orientation_edges;  // degrees
  std::vector<double> orientation_probs;
  std::vector<double> sf_edges;  // cpd, log-spaced
  std::vector<double> sf_probs;
  std::vector<double> nx_edges;
  std::vector<double> ny_edges;
  std::vector<std::vector<double>> size_joint;       // [nx_bin][ny_bin]
  std::vector<std::vector<double>> sf_size_coupling;  // [sf_bin][nx_bin]
  std::uint64_t checksum = 0;  // of the source file, when loaded

  void validate() const;  // throws naming the offending field
};

enum class SamplingRegime { Biological, Uniform };

struct SamplerConfig {
  SamplingRegime regime = SamplingRegime::Biological;
  int n_simple = 256;
  int n_complex = 256;
  std::uint64_t seed = 0;
  bool log_sf = true;  // Uniform regime: sample sf uniformly in log space
  DistributionTable table;  // Biological only
};

// RF-parameter ranges shared by both regimes.
constexpr double kThetaMin = 0.0, kThetaMax = 180.0;
constexpr double kSfMin = 0.5, kSfMax = 11.3;
constexpr double kNMin = 0.1, kNMax = 1.585;

// Both samplers return n_simple Simple descriptors followed by n_complex
// Complex ones, a pure function of (config, seed).
std::vector<ChannelDescriptor> sample_uniform(const SamplerConfig& config);
std::vector<ChannelDescriptor> sample_biological(const SamplerConfig& config);

DistributionTable load_distribution_table(const std::filesystem::path& path);
void save_distribution_table(const DistributionTable& table,
                             const std::filesystem::path& path);

// Path of the table shipped with the artifact (data/bio_distribution.json).
std::filesystem::path default_table_path();

}  // namespace v1
