// Acceptance suite: end-to-end checks on the sampled front-end, training
// loop, corruption battery and analysis pipeline, with pinned tolerances and
// wall-clock budgets. Run order matters: the desk-scale pipeline case
// populates results that the claims-verification case reports on.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "v1net/analysis.hpp"
#include "v1net/backend.hpp"
#include "v1net/corruptions.hpp"
#include "v1net/dataset.hpp"
#include "v1net/frontend.hpp"
#include "v1net/gabor.hpp"
#include "v1net/rng.hpp"
#include "v1net/sampling.hpp"

using namespace v1;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor grating(float theta_deg, float sf_cpd, float phase, int size = 64,
               float ppd = 32.0f) {
  Tensor t({1, 3, size, size});
  const double th = theta_deg * M_PI / 180.0;
  const double kx = std::cos(th) * 2.0 * M_PI * sf_cpd / ppd;
  const double ky = std::sin(th) * 2.0 * M_PI * sf_cpd / ppd;
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float v =
          static_cast<float>(std::cos(kx * (x - c) + ky * (y - c) + phase));
      for (int ch = 0; ch < 3; ++ch)
        t.v[(static_cast<std::size_t>(ch) * size + y) * size + x] = v;
    }
  return t;
}

double peak(const Tensor& acts, int channel) {
  const int N = acts.dim(2) * acts.dim(3);
  const float* p = acts.data() + static_cast<std::size_t>(channel) * N;
  double best = 0.0;
  for (int i = 0; i < N; ++i) best = std::max(best, static_cast<double>(p[i]));
  return best;
}

// One-sample Kolmogorov-Smirnov statistic against a uniform CDF on [0,1].
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::abs((i + 1) / n - u[i]));
    d = std::max(d, std::abs(u[i] - i / n));
  }
  return d;
}

// Running per-unit accumulation so full activation tensors never materialize.
ResponseStats streamed_stats(const FilterBank& bank, const Tensor& images,
                             int chunk = 50) {
  const int n = images.dim(0);
  const std::size_t per_img =
      static_cast<std::size_t>(3) * images.dim(2) * images.dim(3);
  const int C = bank.num_channels();
  std::vector<double> s1, s2;
  int units = 0;
  for (int s = 0; s < n; s += chunk) {
    const int B = std::min(chunk, n - s);
    Tensor part({B, 3, images.dim(2), images.dim(3)});
    std::copy(images.data() + s * per_img, images.data() + (s + B) * per_img,
              part.data());
    auto acts = vone_forward(bank, part);
    if (s == 0) {
      units = acts.dim(2) * acts.dim(3);
      s1.assign(static_cast<std::size_t>(C) * units, 0.0);
      s2.assign(s1.size(), 0.0);
    }
    for (int b = 0; b < B; ++b) {
      const float* p = acts.data() + static_cast<std::size_t>(b) * C * units;
      for (std::size_t i = 0; i < s1.size(); ++i) {
        s1[i] += p[i];
        s2[i] += static_cast<double>(p[i]) * p[i];
      }
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
        const double num = 1.0 - (s1[i] / n) * (s1[i] / n) / (s2[i] / n);
        sp += num / (1.0 - 1.0 / n);
      }
    }
    out.mean_act[c] = act / (static_cast<double>(n) * units);
    out.sparseness[c] = sp / units;
  }
  return out;
}

// Double-precision reference loss for the finite-difference gradient check;
// mirrors Backend::forward (convs + ReLU + GAP + linear) without f32 rounding.
double reference_loss(const Backend& net,
                      const std::vector<std::vector<double>>& params,
                      const Tensor& x, const std::vector<int>& labels) {
  const int B = x.dim(0);
  const auto& convs = net.convs();
  std::vector<double> cur(x.v.begin(), x.v.end());
  int C = x.dim(1), H = x.dim(2), W = x.dim(3);
  for (std::size_t li = 0; li < convs.size(); ++li) {
    const auto& l = convs[li];
    const auto& Wp = params[2 * li];
    const auto& bp = params[2 * li + 1];
    const int oh = (H + 2 * l.pad - l.k) / l.stride + 1;
    const int ow = (W + 2 * l.pad - l.k) / l.stride + 1;
    std::vector<double> nxt(static_cast<std::size_t>(B) * l.out_c * oh * ow);
    for (int b = 0; b < B; ++b)
      for (int oc = 0; oc < l.out_c; ++oc)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            double s = bp[oc];
            for (int ic = 0; ic < l.in_c; ++ic)
              for (int ky = 0; ky < l.k; ++ky) {
                const int y = oy * l.stride - l.pad + ky;
                if (y < 0 || y >= H) continue;
                for (int kx = 0; kx < l.k; ++kx) {
                  const int xx = ox * l.stride - l.pad + kx;
                  if (xx < 0 || xx >= W) continue;
                  s += Wp[((static_cast<std::size_t>(oc) * l.in_c + ic) * l.k +
                           ky) * l.k + kx] *
                       cur[((static_cast<std::size_t>(b) * C + ic) * H + y) * W +
                           xx];
                }
              }
            nxt[((static_cast<std::size_t>(b) * l.out_c + oc) * oh + oy) * ow +
                ox] = s > 0.0 ? s : 0.0;
          }
    cur.swap(nxt);
    C = l.out_c;
    H = oh;
    W = ow;
  }
  const int feat = C, N = H * W;
  const int classes = net.config().num_classes;
  const auto& fcW = params[2 * convs.size()];
  const auto& fcB = params[2 * convs.size() + 1];
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    std::vector<double> logits(classes);
    for (int c = 0; c < classes; ++c) {
      double s = fcB[c];
      for (int f = 0; f < feat; ++f) {
        double pooled = 0.0;
        const double* p = cur.data() + (static_cast<std::size_t>(b) * feat + f) * N;
        for (int i = 0; i < N; ++i) pooled += p[i];
        s += fcW[static_cast<std::size_t>(c) * feat + f] * (pooled / N);
      }
      logits[c] = s;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    total += mx + std::log(sum) - logits[labels[b]];
  }
  return total / B;
}

int bin_of(double v, const std::vector<double>& edges) {
  const int nb = static_cast<int>(edges.size()) - 1;
  for (int i = 0; i < nb - 1; ++i)
    if (v < edges[i + 1]) return i;
  return nb - 1;
}

// Shared state between the desk-scale pipeline case and the claims case.
struct DeskRunResults {
  bool ran = false;
  double bio_clean = 0.0, uniform_clean = 0.0;
  double bio_corrupted = 0.0, uniform_corrupted = 0.0;
  ComparisonReport report;
};
DeskRunResults g_desk;

}  // namespace

TEST_CASE("criterion 1: sparseness oracles and range sweep") {
  const auto t0 = Clock::now();

  const float one_hot[] = {1, 0, 0, 0};
  CHECK(std::abs(lifetime_sparseness(one_hot, 4) - 1.0) <= 1e-12);
  const float flat[] = {1, 1, 1, 1};
  CHECK(std::abs(lifetime_sparseness(flat, 4) - 0.0) <= 1e-12);
  const float geom[] = {0.5f, 0.25f, 0.125f, 0.0625f};
  CHECK(std::abs(lifetime_sparseness(geom, 4) - 0.45098039215686275) <= 1e-12);
  const float mixed[] = {2, 0, 1, 0, 3, 0, 0, 0};
  CHECK(std::abs(lifetime_sparseness(mixed, 8) - 0.7755102040816327) <= 1e-12);
  const float half[] = {1, 1, 0, 0};
  CHECK(std::abs(lifetime_sparseness(half, 4) - 2.0 / 3.0) <= 1e-12);
  const float zeros[] = {0, 0, 0, 0};
  CHECK(lifetime_sparseness(zeros, 4) == 0.0);

  Rng rng(1);
  std::vector<float> a;
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    a.assign(2 + rng.uniform_int(30), 0.0f);
    for (auto& v : a)
      v = rng.bernoulli(0.25) ? 0.0f : static_cast<float>(rng.uniform());
    const double s = lifetime_sparseness(a.data(), static_cast<int>(a.size()));
    if (!(s >= 0.0 && s <= 1.0 + 1e-12)) ++violations;
  }
  CHECK(violations == 0);

  const double el = seconds_since(t0);
  CHECK(el < 1.0);
  std::printf("[criterion 1] sparseness oracles + 10k sweep: ok (%.2fs)\n", el);
}

TEST_CASE("criterion 2: phase invariance and grating selectivity") {
  const auto t0 = Clock::now();

  // Matched simple/complex channels across a parameter spread.
  const float thetas[] = {0.0f, 30.0f, 75.0f, 120.0f};
  const float sfs[] = {1.0f, 2.0f, 4.0f, 6.0f};
  std::vector<ChannelDescriptor> descs;
  for (int i = 0; i < 4; ++i) {
    ChannelDescriptor s{CellType::Simple, {thetas[i], sfs[i], 0.0f, 0.7f, 0.7f},
                        static_cast<int>(descs.size())};
    descs.push_back(s);
    ChannelDescriptor c = s;
    c.cell_type = CellType::Complex;
    c.channel_index = static_cast<int>(descs.size());
    descs.push_back(c);
  }
  auto bank = build_filter_bank(descs);

  for (int i = 0; i < 4; ++i) {
    const int simple_ch = i;       // output order: 4 simple then 4 complex
    const int complex_ch = 4 + i;
    const int center = 16 * 32 + 16;  // fixed unit; spatial peaks just shift
    double cmin = 1e300, cmax = 0.0;
    double smin = 1e300, smax = 0.0;
    for (int p = 0; p < 16; ++p) {  // 16-point phase sweep
      const double ph = 2.0 * M_PI * p / 16;
      auto acts = vone_forward(
          bank, grating(thetas[i], sfs[i], static_cast<float>(ph)));
      const double c = peak(acts, complex_ch);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      const int N = acts.dim(2) * acts.dim(3);
      const double s =
          acts.v[static_cast<std::size_t>(simple_ch) * N + center];
      smin = std::min(smin, s);
      smax = std::max(smax, s);
    }
    CHECK((cmax - cmin) / cmax < 0.01);  // complex: < 1% phase modulation
    CHECK((smax - smin) / std::max(smax, 1e-9) > 0.5);  // simple: > 50%
  }

  // Joint orientation x SF selectivity on an 8 x 8 grating grid, scored with
  // phase-independent energy responses.  Probe parameters are drawn at random
  // around the grid points (jitter up to 25% of the grid spacing) so that
  // "nearest grid point" is unambiguous, and envelopes are constrained to the
  // well-formed regime: no sub-pixel (aliased) sigmas and no envelopes wider
  // than the kernel window, both of which degrade tuning by construction.
  const int n_probe = 100;
  std::vector<double> grid_theta(8), grid_sf(8);
  for (int i = 0; i < 8; ++i) grid_theta[i] = 180.0 * i / 8;
  for (int i = 0; i < 8; ++i)
    grid_sf[i] = 0.5 * std::pow(11.3 / 0.5, i / 7.0);
  const double log_step = std::log(11.3 / 0.5) / 7.0;

  Rng prng(2024);
  std::vector<ChannelDescriptor> probes;
  std::vector<int> want_t, want_s;
  while (static_cast<int>(probes.size()) < n_probe) {
    const int it = prng.uniform_int(8);
    const int is = 3 + prng.uniform_int(5);
    GaborParams p;
    p.theta = static_cast<float>(
        std::fmod(grid_theta[it] + prng.uniform(-0.25, 0.25) * 22.5 + 180.0,
                  180.0));
    p.sf = static_cast<float>(grid_sf[is] *
                              std::exp(prng.uniform(-0.25, 0.25) * log_step));
    p.phase = static_cast<float>(prng.uniform(0.0, 2.0 * M_PI));
    p.nx = static_cast<float>(prng.uniform(0.5, 1.2));
    p.ny = static_cast<float>(prng.uniform(0.5, 1.2));
    const double sx = p.nx / p.sf * 32.0;  // envelope sigma in pixels
    const double sy = p.ny / p.sf * 32.0;
    if (sx < 1.3 || sy < 1.3 || sx > 8.0 || sy > 8.0) continue;
    probes.push_back({CellType::Complex, p,
                      static_cast<int>(probes.size())});
    want_t.push_back(it);
    want_s.push_back(is);
  }
  auto probe_bank = build_filter_bank(probes);

  std::vector<std::vector<double>> responses(
      n_probe, std::vector<double>(64, 0.0));
  for (int it = 0; it < 8; ++it)
    for (int isf = 0; isf < 8; ++isf) {
      auto acts = vone_forward(
          probe_bank, grating(static_cast<float>(grid_theta[it]),
                              static_cast<float>(grid_sf[isf]), 0.3f));
      for (int c = 0; c < n_probe; ++c)
        responses[c][it * 8 + isf] = peak(acts, c);
    }

  int hits = 0;
  for (int c = 0; c < n_probe; ++c) {
    int best = 0;
    for (int g = 1; g < 64; ++g)
      if (responses[c][g] > responses[c][best]) best = g;
    if (best == want_t[c] * 8 + want_s[c]) ++hits;
  }
  CHECK(hits >= 95);

  const double el = seconds_since(t0);
  CHECK(el < 30.0);
  std::printf(
      "[criterion 2] phase invariance ok, selectivity %d/100 (%.1fs)\n", hits,
      el);
}

TEST_CASE("criterion 3: sampled marginals match the target distributions") {
  const auto t0 = Clock::now();
  const int n = 10000;
  const double ks_crit = 1.6276236 / std::sqrt(static_cast<double>(n));

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SamplerConfig cfg;
    cfg.regime = SamplingRegime::Uniform;
    cfg.n_simple = n / 2;
    cfg.n_complex = n / 2;
    cfg.seed = seed;
    auto descs = sample_uniform(cfg);

    std::vector<double> u_theta, u_sf, u_phase, u_nx;
    for (const auto& d : descs) {
      u_theta.push_back(d.params.theta / 180.0);
      u_sf.push_back((std::log(d.params.sf) - std::log(0.5)) /
                     (std::log(11.3) - std::log(0.5)));
      u_phase.push_back(d.params.phase / (2.0 * M_PI));
      u_nx.push_back((d.params.nx - 0.1) / (1.585 - 0.1));
    }
    CHECK(ks_uniform(u_theta) < ks_crit);
    CHECK(ks_uniform(u_sf) < ks_crit);
    CHECK(ks_uniform(u_phase) < ks_crit);
    CHECK(ks_uniform(u_nx) < ks_crit);
  }

  // Biological regime: per-bin counts within 3 sigma of the multinomial
  // expectation, zero-mass coupling cells untouched.
  auto table = load_distribution_table(default_table_path());
  SamplerConfig bio;
  bio.regime = SamplingRegime::Biological;
  bio.n_simple = n / 2;
  bio.n_complex = n / 2;
  bio.seed = 5;
  bio.table = table;
  auto descs = sample_biological(bio);

  const int n_ori = static_cast<int>(table.orientation_probs.size());
  const int n_sf = static_cast<int>(table.sf_probs.size());
  const int n_nx = static_cast<int>(table.nx_edges.size()) - 1;
  std::vector<int> ori_count(n_ori, 0), sf_count(n_sf, 0);
  std::vector<std::vector<int>> cell_count(n_sf, std::vector<int>(n_nx, 0));
  for (const auto& d : descs) {
    ++ori_count[bin_of(d.params.theta, table.orientation_edges)];
    const int sb = bin_of(d.params.sf, table.sf_edges);
    ++sf_count[sb];
    ++cell_count[sb][bin_of(d.params.nx, table.nx_edges)];
  }
  auto within_3sigma = [n](int count, double p) {
    const double sigma = std::sqrt(n * p * (1.0 - p));
    return std::abs(count - n * p) <= 3.0 * sigma;
  };
  for (int i = 0; i < n_ori; ++i)
    CHECK(within_3sigma(ori_count[i], table.orientation_probs[i]));
  for (int i = 0; i < n_sf; ++i)
    CHECK(within_3sigma(sf_count[i], table.sf_probs[i]));
  for (int s = 0; s < n_sf; ++s)
    for (int x = 0; x < n_nx; ++x) {
      const double p = table.sf_probs[s] * table.sf_size_coupling[s][x];
      if (p == 0.0) {
        CHECK(cell_count[s][x] == 0);  // zero-mass cells are exact
      } else {
        CHECK(within_3sigma(cell_count[s][x], p));
      }
    }

  const double el = seconds_since(t0);
  CHECK(el < 10.0);
  std::printf("[criterion 3] KS + multinomial checks: ok (%.1fs)\n", el);
}

TEST_CASE("criterion 4: analysis oracles and inclusion rules") {
  const auto t0 = Clock::now();

  auto r1 = pearson({1, 2, 3, 4, 5}, {2.0, 1.9, 3.4, 4.4, 5.2});
  CHECK(std::abs(r1.r - 0.9683069612535693) <= 1e-7);
  CHECK(std::abs(r1.p - 0.006740688113328452) <= 1e-6);
  auto r2 = pearson({0.1, 0.9, 0.4, 0.7, 0.2, 0.6, 0.3, 0.8},
                    {1.2, 0.3, 0.9, 0.5, 1.1, 0.6, 1.0, 0.4});
  CHECK(std::abs(r2.r - -0.9979654098963517) <= 1e-7);
  CHECK(std::abs(r2.p - 2.102363690715305e-08) <= 1e-6);
  auto r3 = pearson({3, 1, 4, 1, 5, 9, 2, 6, 5, 3},
                    {2, 7, 1, 8, 2, 8, 1, 8, 2, 8});
  CHECK(std::abs(r3.r - 0.10492284287735881) <= 1e-7);
  CHECK(std::abs(r3.p - 0.7729913615627264) <= 1e-6);

  auto perfect = pearson({1, 2, 3, 4}, {2, 4, 6, 8});
  CHECK(perfect.p == 0.0);

  // Constructed tables: one cell empty in exactly one table.
  BinTable a, b;
  a.a_edges = b.a_edges = {0, 1, 2, 3, 4};
  a.b_edges = b.b_edges = {0, 1};
  a.na = b.na = 4;
  a.nb = b.nb = 1;
  a.cells.assign(8, BinCell{});
  b.cells.assign(8, BinCell{});
  for (int i = 0; i < 8; ++i) {
    a.cells[i] = {i + 1, 0.1 * (i + 1), 0.0, 0.3 / (i + 1), 0.0};
    b.cells[i] = {i + 2, 0.1 * (i + 2), 0.0, 0.25 / (i + 1), 0.0};
  }
  a.cells[5] = BinCell{};
  fill_impact(a);
  fill_impact(b);
  auto both = correlate_tables(a, b, CellField::MeanAbsWeight,
                               InclusionRule::BothNonempty);
  CHECK(both.n == 7);
  auto all = correlate_tables(a, b, CellField::Impact, InclusionRule::AllBins);
  CHECK(all.n == 8);

  // impact honors the product definition including the empty-population case
  for (const auto& c : a.cells)
    CHECK(c.impact == downstream_impact(c.count, c.mean_act, c.mean_abs_weight));
  CHECK(a.cells[5].impact == 0.0);

  const double el = seconds_since(t0);
  CHECK(el < 10.0);
  std::printf("[criterion 4] analysis oracles: ok (%.1fs)\n", el);
}

TEST_CASE("criterion 5: training loop correctness") {
  const auto t0 = Clock::now();

  // Full-parameter gradient check on a tiny configuration.
  BackendConfig cfg;
  cfg.v1_channels = 8;
  cfg.bottleneck_out = 4;
  cfg.head = {{4, 1}, {6, 2}};
  cfg.num_classes = 3;
  Backend net(cfg);
  net.init_params(3);
  Tensor x({2, 8, 8, 8});
  Rng rng(9);
  for (float& v : x.v) v = static_cast<float>(rng.uniform());
  std::vector<int> labels = {0, 2};

  // Keep every preactivation clear of the ReLU kink so the derivative is
  // well defined at the evaluation point: nudge channel biases until no unit
  // sits within 1e-3 of zero.
  BackendCache cache;
  for (int pass = 0; pass < 50; ++pass) {
    net.forward(x, cache);
    bool clean = true;
    auto views_nudge = net.param_views();
    for (std::size_t li = 0; li < cache.preacts.size(); ++li) {
      const auto& pre = cache.preacts[li];
      const int C = pre.dim(1), N = pre.dim(2) * pre.dim(3);
      for (int c = 0; c < C; ++c) {
        bool borderline = false;
        for (int b = 0; b < pre.dim(0) && !borderline; ++b)
          for (int i = 0; i < N; ++i)
            if (std::abs(pre.v[(static_cast<std::size_t>(b) * C + c) * N + i]) <
                1e-3f) {
              borderline = true;
              break;
            }
        if (borderline) {
          views_nudge[2 * li + 1][c] += 2.7e-3f;  // bias slot of layer li
          clean = false;
        }
      }
    }
    if (clean) break;
    REQUIRE(pass < 49);
  }
  net.forward(x, cache);
  std::vector<float> dlogits;
  softmax_cross_entropy(cache.logits, 2, 3, labels, &dlogits);
  auto grads = net.make_grads();
  net.backward(cache, dlogits, grads);

  // Finite differences against a double-precision reference forward so the
  // numerical derivative is not limited by f32 rounding.
  auto views = net.param_views();
  std::vector<std::vector<double>> dparams;
  for (const auto& s : views) dparams.emplace_back(s.begin(), s.end());
  int total = 0, ok = 0;
  const double eps = 1e-4;
  for (std::size_t s = 0; s < views.size(); ++s)
    for (std::size_t i = 0; i < views[s].size(); ++i) {
      const double orig = dparams[s][i];
      dparams[s][i] = orig + eps;
      const double lp = reference_loss(net, dparams, x, labels);
      dparams[s][i] = orig - eps;
      const double lm = reference_loss(net, dparams, x, labels);
      dparams[s][i] = orig;
      const double num = (lp - lm) / (2 * eps);
      const double ana = grads.slots[s][i];
      const double rel = std::abs(num - ana) /
                         std::max({std::abs(num), std::abs(ana), 1e-3});
      ++total;
      if (rel <= 1e-3) ++ok;
    }
  std::printf("[criterion 5] gradient check: %d/%d within 1e-3\n", ok, total);
  CHECK(static_cast<double>(ok) / total >= 0.99);

  // Plateau schedule hand traces.
  {
    TrainConfig tc;
    tc.plateau_threshold = 0.01;
    tc.plateau_patience = 5;
    tc.plateau_factor = 10.0;
    PlateauSchedule sch;
    double lr = 0.1;
    lr = sch.step(2.0, lr, tc);
    for (int i = 0; i < 4; ++i) lr = sch.step(1.995, lr, tc);
    CHECK(lr == 0.1);              // 4 stale epochs: not yet
    lr = sch.step(1.995, lr, tc);  // 5th stale epoch
    CHECK(std::abs(lr - 0.01) < 1e-15);
    lr = sch.step(1.0, lr, tc);  // real improvement resets
    for (int i = 0; i < 4; ++i) lr = sch.step(1.0, lr, tc);
    CHECK(std::abs(lr - 0.01) < 1e-15);
    lr = sch.step(1.0, lr, tc);
    CHECK(std::abs(lr - 0.001) < 1e-15);
  }

  // 32-image overfit with a small sampled bank; fixed features, no
  // augmentation.
  const auto root = fs::temp_directory_path() / "v1net_overfit_ds";
  fs::remove_all(root);
  make_synthetic_dataset(root, 4, 8, 2, 12);
  auto train_set = load_images(load_directory_dataset(root, "train"));
  REQUIRE(train_set.images.dim(0) == 32);

  SamplerConfig scfg;
  scfg.regime = SamplingRegime::Uniform;
  scfg.n_simple = 8;
  scfg.n_complex = 8;
  scfg.seed = 4;
  auto bank = build_filter_bank(sample_uniform(scfg));

  BackendConfig bcfg;
  bcfg.v1_channels = bank.num_channels();
  bcfg.bottleneck_out = 16;
  bcfg.head = {{16, 1}, {32, 2}};
  bcfg.num_classes = 4;
  Backend onet(bcfg);
  onet.init_params(21);

  TrainConfig tcfg;
  tcfg.lr0 = 0.05;
  tcfg.weight_decay = 0.0;
  tcfg.batch_size = 32;
  tcfg.epochs = 150;
  tcfg.plateau_threshold = 0.001;
  tcfg.augment = false;
  tcfg.seed = 1;
  auto result = train(bank, onet, tcfg, train_set, train_set, true);
  const auto [train_loss, train_acc] = evaluate(bank, onet, train_set);
  std::printf("[criterion 5] overfit: loss %.4f acc %.3f\n", train_loss,
              train_acc);
  CHECK(train_acc == 1.0);

  // the fixed front-end must not move during training
  CHECK(result.bank_checksum_before == result.bank_checksum_after);
  CHECK(result.bank_checksum_before == bank.checksum());

  std::printf("[criterion 5] training loop: ok (%.1fs)\n", seconds_since(t0));
}

TEST_CASE("criterion 6: desk-scale end-to-end pipeline") {
  const auto t0 = Clock::now();

  const auto root = fs::temp_directory_path() / "v1net_desk_ds";
  fs::remove_all(root);
  make_synthetic_dataset(root, 10, 100, 20, 77);
  auto train_set = load_images(load_directory_dataset(root, "train"));
  auto val_set = load_images(load_directory_dataset(root, "val"));
  REQUIRE(train_set.images.dim(0) == 1000);
  REQUIRE(val_set.images.dim(0) == 200);

  auto table = load_distribution_table(default_table_path());
  struct Variant {
    std::string name;
    FilterBank bank;
    std::vector<Backend> nets;  // one per training seed
    std::vector<double> val_accs;
  };
  std::vector<Variant> variants;
  for (const std::string name : {"biological", "uniform"}) {
    SamplerConfig scfg;
    scfg.n_simple = 256;
    scfg.n_complex = 256;
    scfg.seed = 100;
    std::vector<ChannelDescriptor> descs;
    if (name == "biological") {
      scfg.regime = SamplingRegime::Biological;
      scfg.table = table;
      descs = sample_biological(scfg);
    } else {
      scfg.regime = SamplingRegime::Uniform;
      descs = sample_uniform(scfg);
    }
    variants.push_back({name, build_filter_bank(descs), {}, {}});
  }

  for (auto& v : variants) {
    for (std::uint64_t seed : {0ull, 1ull}) {
      BackendConfig bcfg;
      bcfg.v1_channels = v.bank.num_channels();
      bcfg.num_classes = 10;
      Backend net(bcfg);
      net.init_params(derive_seed(seed, 0xbacc));
      TrainConfig tcfg;
      tcfg.epochs = 5;
      tcfg.seed = seed;
      tcfg.lr0 = 0.02;
      // Rotation augmentation (+-30 deg) would scramble the orientation-coded
      // class identities of the synthetic set, so train on clean geometry.
      tcfg.augment = false;
      auto result = train(v.bank, net, tcfg, train_set, val_set);
      const double acc = result.metrics.back().val_acc;
      std::printf("[criterion 6] %s seed %llu: val acc %.3f\n", v.name.c_str(),
                  static_cast<unsigned long long>(seed), acc);
      CHECK(acc > 0.30);
      v.val_accs.push_back(acc);
      v.nets.push_back(std::move(net));
    }
  }

  // Corruption battery on one seed per variant.
  CorruptionLevels levels;
  std::vector<double> mean_corrupted(2, 0.0), clean(2, 0.0);
  for (int vi = 0; vi < 2; ++vi) {
    auto rows =
        evaluate_robustness(variants[vi].bank, variants[vi].nets[0], val_set,
                            levels, 0);
    REQUIRE(rows.size() == 1 + 7 * 5);
    clean[vi] = rows[0].top1;
    double s = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) s += rows[i].top1;
    mean_corrupted[vi] = s / (rows.size() - 1);
    std::printf("[criterion 6] %s: clean %.3f, mean corrupted %.3f\n",
                variants[vi].name.c_str(), clean[vi], mean_corrupted[vi]);
  }

  // Channel-level analysis and the four cross-variant correlations.
  std::vector<VariantAnalysis> va(2);
  Tensor stats_imgs = val_set.images;
  normalize_batch(stats_imgs);
  for (int vi = 0; vi < 2; ++vi) {
    va[vi].descriptors = variants[vi].bank.descriptors;
    va[vi].stats = streamed_stats(variants[vi].bank, stats_imgs);
    va[vi].weights =
        mean_abs_downstream_weights(variants[vi].nets[0].bottleneck_weight());
  }
  auto rep = compare_variants(va[0], va[1]);
  CHECK(rep.rf_a.total_count() == 512);
  CHECK(rep.rf_b.total_count() == 512);
  for (const auto* c :
       {&rep.weights_by_rf, &rep.weights_by_resp, &rep.impact_by_rf,
        &rep.impact_by_resp}) {
    CHECK(std::isfinite(c->r));
    CHECK(std::abs(c->r) <= 1.0);
    CHECK(c->p >= 0.0);
    CHECK(c->p <= 1.0);
    CHECK(c->n >= 3);
  }
  std::printf(
      "[criterion 6] correlations: weights rf r=%.3f resp r=%.3f, impact rf "
      "r=%.3f resp r=%.3f\n",
      rep.weights_by_rf.r, rep.weights_by_resp.r, rep.impact_by_rf.r,
      rep.impact_by_resp.r);

  g_desk.ran = true;
  g_desk.bio_clean = clean[0];
  g_desk.uniform_clean = clean[1];
  g_desk.bio_corrupted = mean_corrupted[0];
  g_desk.uniform_corrupted = mean_corrupted[1];
  g_desk.report = rep;

  const double el = seconds_since(t0);
  CHECK(el < 1800.0);
  std::printf("[criterion 6] end-to-end pipeline: ok (%.0fs)\n", el);
}

TEST_CASE("criterion 7: claims verification at this scale") {
  // The published full-scale results (ImageNet-class training, corruption
  // benchmark deltas near 8.7 vs 7.9 points, bin-level correlations around
  // 0.75/0.18/0.81/0.87) need datasets and compute far beyond this harness;
  // they are declared NOT reproducible here and are not gated on.
  std::printf(
      "[criterion 7] full-scale quantitative claims: NOT reproduced at desk "
      "scale (out of scope)\n");

  // Structural claim 1: biological sampling leaves the high-SF/small-envelope
  // and low-SF/large-envelope corners empty; uniform sampling fills them.
  auto table = load_distribution_table(default_table_path());
  SamplerConfig bio;
  bio.regime = SamplingRegime::Biological;
  bio.n_simple = 256;
  bio.n_complex = 256;
  bio.seed = 100;
  bio.table = table;
  auto bio_descs = sample_biological(bio);
  SamplerConfig uni = bio;
  uni.regime = SamplingRegime::Uniform;
  auto uni_descs = sample_uniform(uni);

  const int n_sf = static_cast<int>(table.sf_probs.size());
  const int n_nx = static_cast<int>(table.nx_edges.size()) - 1;
  auto count_cells = [&](const std::vector<ChannelDescriptor>& descs) {
    std::vector<std::vector<int>> c(n_sf, std::vector<int>(n_nx, 0));
    for (const auto& d : descs) {
      const double sf = std::clamp<double>(d.params.sf, table.sf_edges.front(),
                                           table.sf_edges.back());
      const double nx = std::clamp<double>(d.params.nx, table.nx_edges.front(),
                                           table.nx_edges.back());
      ++c[bin_of(sf, table.sf_edges)][bin_of(nx, table.nx_edges)];
    }
    return c;
  };
  auto bio_cells = count_cells(bio_descs);
  auto uni_cells = count_cells(uni_descs);
  int zero_cells_checked = 0;
  for (int s = 0; s < n_sf; ++s)
    for (int x = 0; x < n_nx; ++x)
      if (table.sf_size_coupling[s][x] == 0.0) {
        ++zero_cells_checked;
        CHECK(bio_cells[s][x] == 0);
        CHECK(uni_cells[s][x] > 0);
      }
  CHECK(zero_cells_checked >= 2);
  std::printf(
      "[criterion 7] structural: %d zero-mass RF cells empty under biological "
      "sampling, populated under uniform\n",
      zero_cells_checked);

  // Structural claim 2: tabulated impact is exactly the
  // count x mean-activation x mean-|weight| product.
  if (g_desk.ran) {
    for (const auto* t :
         {&g_desk.report.rf_a, &g_desk.report.rf_b, &g_desk.report.resp_a,
          &g_desk.report.resp_b})
      for (const auto& c : t->cells)
        CHECK(c.impact ==
              downstream_impact(c.count, c.mean_act, c.mean_abs_weight));

    // Directional robustness comparison: reported, not gated, at this scale.
    const double gap = g_desk.bio_corrupted - g_desk.uniform_corrupted;
    std::printf(
        "[criterion 7] robustness gap (biological - uniform mean corrupted "
        "top-1): %+.4f (clean %+.4f); informational only\n",
        gap, g_desk.bio_clean - g_desk.uniform_clean);
  } else {
    std::printf(
        "[criterion 7] desk-scale results unavailable; impact and robustness "
        "reporting skipped\n");
    CHECK(false);
  }
}
