#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "v1net/gabor.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

// Per-channel response statistics over an evaluation batch.
struct ResponseStats {
  std::vector<double> mean_act;    // mean over spatial units and batch
  std::vector<double> sparseness;  // lifetime sparseness, mean over units
};

// Vinje-Gallant lifetime sparseness of one unit's responses a[0..b),
// S = (1 - (sum a / b)^2 / (sum a^2 / b)) / (1 - 1/b). An all-zero response
// (the 0/0 case) is defined as 0.
double lifetime_sparseness(const float* a, int b, int stride = 1);

// acts: [B, C, h, w] post-nonlinearity, B >= 2.
ResponseStats response_stats(const Tensor& acts);

struct BinCell {
  int count = 0;
  double mean_act = 0.0;
  double mean_sparseness = 0.0;
  double mean_abs_weight = 0.0;
  double impact = 0.0;
};

// Grid of neuronal sub-populations: cell type x axis-a x axis-b, where the
// axes are (SF, nx) or (mean activation, sparseness). Intervals are
// right-open, the last bin right-closed.
struct BinTable {
  std::string axis_a, axis_b;
  std::vector<double> a_edges, b_edges;
  int na = 0, nb = 0;
  std::vector<BinCell> cells;  // [2][na][nb]

  BinCell& at(int cell_type, int ia, int ib) {
    return cells[(static_cast<std::size_t>(cell_type) * na + ia) * nb + ib];
  }
  const BinCell& at(int cell_type, int ia, int ib) const {
    return cells[(static_cast<std::size_t>(cell_type) * na + ia) * nb + ib];
  }
  int num_cells() const { return 2 * na * nb; }
  int total_count() const;
};

int find_bin(double v, const std::vector<double>& edges);  // throws if outside

std::vector<double> log_spaced_edges(double lo, double hi, int n);
std::vector<double> linear_edges(double lo, double hi, int n);
// Quantile edges over pooled values; equal quantiles are deduplicated so
// degenerate inputs collapse into fewer bins.
std::vector<double> quantile_edges(std::vector<double> values, int n);

BinTable bin_by_rf(const std::vector<ChannelDescriptor>& descriptors,
                   const ResponseStats& stats,
                   const std::vector<double>& weights,
                   const std::vector<double>& sf_edges,
                   const std::vector<double>& nx_edges);

BinTable bin_by_response(const std::vector<ChannelDescriptor>& descriptors,
                         const ResponseStats& stats,
                         const std::vector<double>& weights,
                         const std::vector<double>& act_edges,
                         const std::vector<double>& sparseness_edges);

// Mean |W| over the bottleneck outputs; W is [outputs x channels], bias
// excluded.
std::vector<double> mean_abs_downstream_weights(const Tensor& W);

// count x mean activation x mean |weight|; 0 for empty populations.
double downstream_impact(int count, double mean_act, double mean_abs_weight);
void fill_impact(BinTable& table);

enum class InclusionRule { BothNonempty, AllBins };

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;
  int n = 0;
  InclusionRule rule = InclusionRule::AllBins;
};

// Pearson r with a two-sided p-value from the exact t reference
// (regularized incomplete beta); |r| = 1 gives p = 0.
CorrelationResult pearson(const std::vector<double>& x,
                          const std::vector<double>& y,
                          InclusionRule rule = InclusionRule::AllBins);

double regularized_incomplete_beta(double a, double b, double x);

enum class CellField { MeanAbsWeight, Impact, MeanAct, MeanSparseness };

// Correlate one per-cell field across two tables with matching axes.
// BothNonempty drops cells empty in either table; AllBins keeps every cell.
CorrelationResult correlate_tables(const BinTable& a, const BinTable& b,
                                   CellField field, InclusionRule rule);

// One trained variant's channel-level analysis inputs.
struct VariantAnalysis {
  std::vector<ChannelDescriptor> descriptors;
  ResponseStats stats;
  std::vector<double> weights;  // mean abs downstream weight per channel
};

struct ComparisonReport {
  BinTable rf_a, rf_b;      // RF-property tables for the two variants
  BinTable resp_a, resp_b;  // response-property tables (shared edges)
  CorrelationResult weights_by_rf;      // BothNonempty
  CorrelationResult weights_by_resp;    // BothNonempty
  CorrelationResult impact_by_rf;       // AllBins
  CorrelationResult impact_by_resp;     // AllBins
};

ComparisonReport compare_variants(const VariantAnalysis& a,
                                  const VariantAnalysis& b, int sf_bins = 5,
                                  int nx_bins = 3, int act_bins = 4,
                                  int sparseness_bins = 4);

// CSV surfaces shared by the analyze/report subcommands.
void write_stats_csv(const VariantAnalysis& v, const std::filesystem::path& path);
VariantAnalysis read_stats_csv(const std::filesystem::path& path);
void write_bintable_csv(const BinTable& t, const std::filesystem::path& path);
void write_correlations_csv(const ComparisonReport& r,
                            const std::filesystem::path& path);

}  // namespace v1
