#include "v1net/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace v1 {

double lifetime_sparseness(const float* a, int b, int stride) {
  if (b < 2) throw std::invalid_argument("sparseness needs batch size >= 2");
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < b; ++k) {
    const double v = a[static_cast<std::size_t>(k) * stride];
    s1 += v;
    s2 += v * v;
  }
  if (s2 <= 0.0) return 0.0;  // silent unit
  const double num = 1.0 - (s1 / b) * (s1 / b) / (s2 / b);
  return num / (1.0 - 1.0 / b);
}

ResponseStats response_stats(const Tensor& acts) {
  if (acts.shape.size() != 4)
    throw std::invalid_argument("response_stats expects [B,C,h,w]");
  const int B = acts.dim(0), C = acts.dim(1);
  const int units = acts.dim(2) * acts.dim(3);
  if (B < 2) throw std::invalid_argument("response_stats needs batch >= 2");

  // Accumulate per-unit sums across the batch dimension (batch is the slow
  // axis in memory).
  const std::size_t cu = static_cast<std::size_t>(C) * units;
  std::vector<double> s1(cu, 0.0), s2(cu, 0.0);
  for (int b = 0; b < B; ++b) {
    const float* p = acts.data() + b * cu;
    for (std::size_t i = 0; i < cu; ++i) {
      const double v = p[i];
      s1[i] += v;
      s2[i] += v * v;
    }
  }
  ResponseStats out;
  out.mean_act.resize(C);
  out.sparseness.resize(C);
  for (int c = 0; c < C; ++c) {
    double act = 0.0, sp = 0.0;
    for (int u = 0; u < units; ++u) {
      const std::size_t i = static_cast<std::size_t>(c) * units + u;
      act += s1[i];
      if (s2[i] > 0.0) {
        const double num = 1.0 - (s1[i] / B) * (s1[i] / B) / (s2[i] / B);
        sp += num / (1.0 - 1.0 / B);
      }
    }
    out.mean_act[c] = act / (static_cast<double>(B) * units);
    out.sparseness[c] = sp / units;
  }
  return out;
}

int BinTable::total_count() const {
  int n = 0;
  for (const auto& c : cells) n += c.count;
  return n;
}

int find_bin(double v, const std::vector<double>& edges) {
  const int nb = static_cast<int>(edges.size()) - 1;
  if (v < edges.front() || v > edges.back())
    throw std::out_of_range("value " + std::to_string(v) +
                            " outside bin edge range");
  for (int i = 0; i < nb - 1; ++i)
    if (v < edges[i + 1]) return i;
  return nb - 1;  // last bin right-closed
}

std::vector<double> log_spaced_edges(double lo, double hi, int n) {
  std::vector<double> e(n + 1);
  for (int i = 0; i <= n; ++i)
    e[i] = lo * std::pow(hi / lo, static_cast<double>(i) / n);
  e.front() = lo;
  e.back() = hi;
  return e;
}

std::vector<double> linear_edges(double lo, double hi, int n) {
  std::vector<double> e(n + 1);
  for (int i = 0; i <= n; ++i) e[i] = lo + (hi - lo) * i / n;
  return e;
}

std::vector<double> quantile_edges(std::vector<double> values, int n) {
  if (values.empty()) throw std::invalid_argument("quantile_edges: no values");
  std::sort(values.begin(), values.end());
  std::vector<double> e;
  e.push_back(values.front());
  for (int i = 1; i < n; ++i) {
    const double q = static_cast<double>(i) / n;
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - lo;
    const double v = (lo + 1 < values.size())
                         ? values[lo] * (1 - frac) + values[lo + 1] * frac
                         : values[lo];
    if (v > e.back()) e.push_back(v);
  }
  double top = values.back();
  if (top <= e.back()) top = e.back() + 1e-12;  // degenerate: single bin
  e.push_back(top);
  return e;
}

namespace {

void check_edges_increasing(const std::vector<double>& e, const char* what) {
  if (e.size() < 2) throw std::invalid_argument(std::string(what) + ": too few edges");
  for (std::size_t i = 0; i + 1 < e.size(); ++i)
    if (e[i] >= e[i + 1])
      throw std::invalid_argument(std::string(what) + ": edges not increasing");
}

BinTable bin_channels(const std::vector<ChannelDescriptor>& descs,
                      const ResponseStats& stats,
                      const std::vector<double>& weights,
                      const std::vector<double>& a_edges,
                      const std::vector<double>& b_edges,
                      const std::string& axis_a, const std::string& axis_b,
                      bool by_rf) {
  const std::size_t C = descs.size();
  if (stats.mean_act.size() != C || stats.sparseness.size() != C ||
      weights.size() != C)
    throw std::invalid_argument("binning: stats/weights length mismatch");
  check_edges_increasing(a_edges, axis_a.c_str());
  check_edges_increasing(b_edges, axis_b.c_str());

  BinTable t;
  t.axis_a = axis_a;
  t.axis_b = axis_b;
  t.a_edges = a_edges;
  t.b_edges = b_edges;
  t.na = static_cast<int>(a_edges.size()) - 1;
  t.nb = static_cast<int>(b_edges.size()) - 1;
  t.cells.assign(static_cast<std::size_t>(2) * t.na * t.nb, BinCell{});

  for (std::size_t c = 0; c < C; ++c) {
    const int ct = descs[c].cell_type == CellType::Simple ? 0 : 1;
    const double va = by_rf ? descs[c].params.sf : stats.mean_act[c];
    const double vb = by_rf ? descs[c].params.nx : stats.sparseness[c];
    auto& cell = t.at(ct, find_bin(va, a_edges), find_bin(vb, b_edges));
    ++cell.count;
    cell.mean_act += stats.mean_act[c];
    cell.mean_sparseness += stats.sparseness[c];
    cell.mean_abs_weight += weights[c];
  }
  for (auto& cell : t.cells)
    if (cell.count > 0) {
      cell.mean_act /= cell.count;
      cell.mean_sparseness /= cell.count;
      cell.mean_abs_weight /= cell.count;
    }
  fill_impact(t);
  return t;
}

}  // namespace

BinTable bin_by_rf(const std::vector<ChannelDescriptor>& descriptors,
                   const ResponseStats& stats,
                   const std::vector<double>& weights,
                   const std::vector<double>& sf_edges,
                   const std::vector<double>& nx_edges) {
  return bin_channels(descriptors, stats, weights, sf_edges, nx_edges, "sf",
                      "nx", true);
}

BinTable bin_by_response(const std::vector<ChannelDescriptor>& descriptors,
                         const ResponseStats& stats,
                         const std::vector<double>& weights,
                         const std::vector<double>& act_edges,
                         const std::vector<double>& sparseness_edges) {
  return bin_channels(descriptors, stats, weights, act_edges, sparseness_edges,
                      "mean_act", "sparseness", false);
}

std::vector<double> mean_abs_downstream_weights(const Tensor& W) {
  if (W.shape.size() != 2)
    throw std::invalid_argument("weights must be [outputs x channels]");
  const int outputs = W.dim(0), channels = W.dim(1);
  std::vector<double> out(channels, 0.0);
  for (int o = 0; o < outputs; ++o)
    for (int c = 0; c < channels; ++c)
      out[c] += std::abs(W.v[static_cast<std::size_t>(o) * channels + c]);
  for (auto& v : out) v /= outputs;
  return out;
}

double downstream_impact(int count, double mean_act, double mean_abs_weight) {
  if (count == 0) return 0.0;
  return count * mean_act * mean_abs_weight;
}

void fill_impact(BinTable& table) {
  for (auto& c : table.cells)
    c.impact = downstream_impact(c.count, c.mean_act, c.mean_abs_weight);
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Lentz continued fraction (Numerical Recipes style).
  auto betacf = [](double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const int m2 = 2 * m;
      double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + aa / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
  };
  const double lnbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lnbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

CorrelationResult pearson(const std::vector<double>& x,
                          const std::vector<double>& y, InclusionRule rule) {
  const int n = static_cast<int>(x.size());
  if (y.size() != x.size()) throw std::invalid_argument("pearson: length mismatch");
  if (n < 3) throw std::invalid_argument("pearson: need n >= 3");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw std::domain_error("pearson: zero variance input");
  CorrelationResult res;
  res.rule = rule;
  res.n = n;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2;
  const double one_minus_r2 = 1.0 - res.r * res.r;
  if (one_minus_r2 <= 1e-15) {
    res.p = 0.0;  // perfect linearity convention
  } else {
    const double t = res.r * std::sqrt(df / one_minus_r2);
    res.p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  }
  return res;
}

CorrelationResult correlate_tables(const BinTable& a, const BinTable& b,
                                   CellField field, InclusionRule rule) {
  if (a.na != b.na || a.nb != b.nb || a.cells.size() != b.cells.size())
    throw std::invalid_argument("correlate_tables: mismatched bin grids");
  auto get = [field](const BinCell& c) {
    switch (field) {
      case CellField::MeanAbsWeight: return c.mean_abs_weight;
      case CellField::Impact: return c.impact;
      case CellField::MeanAct: return c.mean_act;
      case CellField::MeanSparseness: return c.mean_sparseness;
    }
    return 0.0;
  };
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    if (rule == InclusionRule::BothNonempty &&
        (a.cells[i].count == 0 || b.cells[i].count == 0))
      continue;
    xs.push_back(get(a.cells[i]));
    ys.push_back(get(b.cells[i]));
  }
  return pearson(xs, ys, rule);
}

ComparisonReport compare_variants(const VariantAnalysis& a,
                                  const VariantAnalysis& b, int sf_bins,
                                  int nx_bins, int act_bins,
                                  int sparseness_bins) {
  const auto sf_edges = log_spaced_edges(0.5, 11.3, sf_bins);
  const auto nx_edges = linear_edges(0.1, 1.585, nx_bins);
  ComparisonReport rep;
  rep.rf_a = bin_by_rf(a.descriptors, a.stats, a.weights, sf_edges, nx_edges);
  rep.rf_b = bin_by_rf(b.descriptors, b.stats, b.weights, sf_edges, nx_edges);

  // Response axes: activation edges from the pooled two-variant quantiles,
  // sparseness on its natural [0,1] range.
  std::vector<double> pooled = a.stats.mean_act;
  pooled.insert(pooled.end(), b.stats.mean_act.begin(), b.stats.mean_act.end());
  const auto act_edges = quantile_edges(pooled, act_bins);
  const auto sp_edges = linear_edges(0.0, 1.0, sparseness_bins);
  rep.resp_a = bin_by_response(a.descriptors, a.stats, a.weights, act_edges,
                               sp_edges);
  rep.resp_b = bin_by_response(b.descriptors, b.stats, b.weights, act_edges,
                               sp_edges);

  rep.weights_by_rf = correlate_tables(rep.rf_a, rep.rf_b,
                                       CellField::MeanAbsWeight,
                                       InclusionRule::BothNonempty);
  rep.weights_by_resp = correlate_tables(rep.resp_a, rep.resp_b,
                                         CellField::MeanAbsWeight,
                                         InclusionRule::BothNonempty);
  rep.impact_by_rf = correlate_tables(rep.rf_a, rep.rf_b, CellField::Impact,
                                      InclusionRule::AllBins);
  rep.impact_by_resp = correlate_tables(rep.resp_a, rep.resp_b,
                                        CellField::Impact, InclusionRule::AllBins);
  return rep;
}

void write_stats_csv(const VariantAnalysis& v, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "channel,cell_type,theta,sf,nx,ny,mean_act,sparseness,mean_abs_w\n";
  os.precision(10);
  for (std::size_t c = 0; c < v.descriptors.size(); ++c) {
    const auto& d = v.descriptors[c];
    os << d.channel_index << ","
       << (d.cell_type == CellType::Simple ? "simple" : "complex") << ","
       << d.params.theta << "," << d.params.sf << "," << d.params.nx << ","
       << d.params.ny << "," << v.stats.mean_act[c] << ","
       << v.stats.sparseness[c] << "," << v.weights[c] << "\n";
  }
}

VariantAnalysis read_stats_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty stats csv");
  VariantAnalysis v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9)
      throw std::runtime_error("stats csv: bad row: " + line);
    ChannelDescriptor d;
    d.channel_index = std::stoi(fields[0]);
    d.cell_type = fields[1] == "simple" ? CellType::Simple : CellType::Complex;
    d.params.theta = std::stof(fields[2]);
    d.params.sf = std::stof(fields[3]);
    d.params.nx = std::stof(fields[4]);
    d.params.ny = std::stof(fields[5]);
    v.descriptors.push_back(d);
    v.stats.mean_act.push_back(std::stod(fields[6]));
    v.stats.sparseness.push_back(std::stod(fields[7]));
    v.weights.push_back(std::stod(fields[8]));
  }
  return v;
}

void write_bintable_csv(const BinTable& t, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "cell_type," << t.axis_a << "_bin," << t.axis_b << "_bin," << t.axis_a
     << "_lo," << t.axis_a << "_hi," << t.axis_b << "_lo," << t.axis_b
     << "_hi,count,mean_act,mean_sparseness,mean_abs_weight,impact\n";
  os.precision(10);
  for (int ct = 0; ct < 2; ++ct)
    for (int ia = 0; ia < t.na; ++ia)
      for (int ib = 0; ib < t.nb; ++ib) {
        const auto& c = t.at(ct, ia, ib);
        os << (ct == 0 ? "simple" : "complex") << "," << ia << "," << ib << ","
           << t.a_edges[ia] << "," << t.a_edges[ia + 1] << "," << t.b_edges[ib]
           << "," << t.b_edges[ib + 1] << "," << c.count << "," << c.mean_act
           << "," << c.mean_sparseness << "," << c.mean_abs_weight << ","
           << c.impact << "\n";
      }
}

void write_correlations_csv(const ComparisonReport& r,
                            const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "quantity,binning,inclusion_rule,r,p,n\n";
  os.precision(10);
  auto row = [&os](const char* q, const char* binning,
                   const CorrelationResult& c) {
    os << q << "," << binning << ","
       << (c.rule == InclusionRule::BothNonempty ? "both_nonempty" : "all_bins")
       << "," << c.r << "," << c.p << "," << c.n << "\n";
  };
  row("mean_abs_weight", "rf", r.weights_by_rf);
  row("mean_abs_weight", "response", r.weights_by_resp);
  row("impact", "rf", r.impact_by_rf);
  row("impact", "response", r.impact_by_resp);
}

}  // namespace v1
