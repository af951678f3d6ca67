#include "v1net/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "v1net/frontend.hpp"

namespace v1 {

namespace {

const char* kNames[kNumCorruptionKinds] = {
    "gaussian_noise", "shot_noise", "impulse_noise", "contrast",
    "brightness",     "pixelate",   "defocus_blur"};

void clamp01(float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.0f, 1.0f);
}

void pixelate(float* img, int H, int W, double fraction) {
  const int th = std::max(1, static_cast<int>(std::lround(H * fraction)));
  const int tw = std::max(1, static_cast<int>(std::lround(W * fraction)));
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<float> small(static_cast<std::size_t>(th) * tw);
  for (int c = 0; c < 3; ++c) {
    float* pc = img + c * plane;
    // box average over the source cells of each target pixel
    for (int ty = 0; ty < th; ++ty) {
      const int y0 = ty * H / th, y1 = std::max(y0 + 1, (ty + 1) * H / th);
      for (int tx = 0; tx < tw; ++tx) {
        const int x0 = tx * W / tw, x1 = std::max(x0 + 1, (tx + 1) * W / tw);
        double s = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) s += pc[y * W + x];
        small[ty * tw + tx] =
            static_cast<float>(s / ((y1 - y0) * (x1 - x0)));
      }
    }
    // nearest-neighbor upscale
    for (int y = 0; y < H; ++y) {
      const int ty = std::min(th - 1, y * th / H);
      for (int x = 0; x < W; ++x) {
        const int tx = std::min(tw - 1, x * tw / W);
        pc[y * W + x] = small[ty * tw + tx];
      }
    }
  }
}

void defocus(float* img, int H, int W, double radius) {
  // Antialiased disk kernel, normalized to unit sum.
  const int r = static_cast<int>(std::ceil(radius + 0.5));
  const int ks = 2 * r + 1;
  std::vector<float> kern(static_cast<std::size_t>(ks) * ks);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double d = std::sqrt(static_cast<double>(x * x + y * y));
      const double w = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      kern[(y + r) * ks + (x + r)] = static_cast<float>(w);
      sum += w;
    }
  for (auto& w : kern) w = static_cast<float>(w / sum);

  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<float> out(plane);
  for (int c = 0; c < 3; ++c) {
    float* pc = img + c * plane;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int ky = -r; ky <= r; ++ky) {
          const int yy = std::clamp(y + ky, 0, H - 1);
          for (int kx = -r; kx <= r; ++kx) {
            const int xx = std::clamp(x + kx, 0, W - 1);
            s += kern[(ky + r) * ks + (kx + r)] * pc[yy * W + xx];
          }
        }
        out[y * W + x] = static_cast<float>(s);
      }
    std::copy(out.begin(), out.end(), pc);
  }
}

}  // namespace

std::string corruption_name(CorruptionKind kind) {
  return kNames[static_cast<int>(kind)];
}

CorruptionKind corruption_from_name(const std::string& name) {
  for (int i = 0; i < kNumCorruptionKinds; ++i)
    if (name == kNames[i]) return static_cast<CorruptionKind>(i);
  throw std::invalid_argument("unknown corruption kind: " + name);
}

CorruptionLevels load_corruption_levels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  nlohmann::json j;
  is >> j;
  CorruptionLevels lv;
  auto read5 = [&](const char* kind, const char* field,
                   std::array<double, 5>& dst) {
    if (!j.contains(kind)) return;
    auto v = j.at(kind).at(field).get<std::vector<double>>();
    if (v.size() != 5)
      throw std::runtime_error(std::string(kind) + "." + field +
                               ": expected 5 severity values");
    std::copy(v.begin(), v.end(), dst.begin());
  };
  read5("gaussian_noise", "sigma", lv.gaussian_sigma);
  read5("shot_noise", "photons", lv.shot_photons);
  read5("impulse_noise", "rate", lv.impulse_rate);
  read5("contrast", "scale", lv.contrast_scale);
  read5("brightness", "delta", lv.brightness_delta);
  read5("pixelate", "fraction", lv.pixelate_fraction);
  read5("defocus_blur", "radius", lv.defocus_radius);
  return lv;
}

void corrupt(float* img, int H, int W, const CorruptionSpec& spec,
             const CorruptionLevels& lv, Rng& rng) {
  if (spec.severity == 0) return;  // identity convention
  if (spec.severity < 0 || spec.severity > 5)
    throw std::out_of_range("corruption severity must be in [0,5]");
  const int s = spec.severity - 1;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t n = 3 * plane;
  switch (spec.kind) {
    case CorruptionKind::GaussianNoise: {
      const double sigma = lv.gaussian_sigma[s];
      for (std::size_t i = 0; i < n; ++i)
        img[i] += static_cast<float>(sigma * rng.normal());
      break;
    }
    case CorruptionKind::ShotNoise: {
      const double lam = lv.shot_photons[s];
      for (std::size_t i = 0; i < n; ++i)
        img[i] = static_cast<float>(rng.poisson(img[i] * lam) / lam);
      break;
    }
    case CorruptionKind::ImpulseNoise: {
      const double p = lv.impulse_rate[s];
      for (std::size_t i = 0; i < n; ++i)
        if (rng.bernoulli(p)) img[i] = rng.bernoulli(0.5) ? 1.0f : 0.0f;
      break;
    }
    case CorruptionKind::Contrast: {
      const double c = lv.contrast_scale[s];
      for (int ch = 0; ch < 3; ++ch) {
        float* pc = img + ch * plane;
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += pc[i];
        mean /= plane;
        for (std::size_t i = 0; i < plane; ++i)
          pc[i] = static_cast<float>((pc[i] - mean) * c + mean);
      }
      break;
    }
    case CorruptionKind::Brightness: {
      const double b = lv.brightness_delta[s];
      for (std::size_t i = 0; i < n; ++i) img[i] += static_cast<float>(b);
      break;
    }
    case CorruptionKind::Pixelate:
      pixelate(img, H, W, lv.pixelate_fraction[s]);
      break;
    case CorruptionKind::DefocusBlur:
      defocus(img, H, W, lv.defocus_radius[s]);
      break;
  }
  clamp01(img, n);
}

std::vector<RobustnessRow> evaluate_robustness(
    const FilterBank& bank, const Backend& net, const LoadedDataset& data,
    const CorruptionLevels& levels, std::uint64_t seed, int batch_size) {
  const int N = data.images.dim(0);
  const int H = data.images.dim(2), W = data.images.dim(3);
  const std::size_t img_sz = 3 * static_cast<std::size_t>(H) * W;
  const int classes = net.config().num_classes;
  std::vector<RobustnessRow> rows;
  BackendCache cache;

  auto run = [&](const CorruptionSpec* spec) {
    int correct = 0;
    for (int start = 0; start < N; start += batch_size) {
      const int B = std::min(batch_size, N - start);
      Tensor batch({B, 3, H, W});
      for (int b = 0; b < B; ++b) {
        const int idx = start + b;
        float* dst = batch.data() + static_cast<std::size_t>(b) * img_sz;
        std::copy(data.images.data() + idx * img_sz,
                  data.images.data() + (idx + 1) * img_sz, dst);
        if (spec) {
          Rng rng(derive_seed(seed,
                              static_cast<std::uint64_t>(spec->kind) * 16 +
                                  spec->severity,
                              idx));
          corrupt(dst, H, W, *spec, levels, rng);
        }
      }
      normalize_batch(batch);
      Tensor acts = vone_forward(bank, batch);
      net.forward(acts, cache);
      for (int b = 0; b < B; ++b) {
        const float* lr = cache.logits.data() + static_cast<std::size_t>(b) * classes;
        int arg = 0;
        for (int c = 1; c < classes; ++c)
          if (lr[c] > lr[arg]) arg = c;
        if (arg == data.labels[start + b]) ++correct;
      }
    }
    return static_cast<double>(correct) / N;
  };

  rows.push_back({"clean", 0, run(nullptr), N});
  for (int k = 0; k < kNumCorruptionKinds; ++k)
    for (int sev = 1; sev <= 5; ++sev) {
      CorruptionSpec spec{static_cast<CorruptionKind>(k), sev};
      rows.push_back({corruption_name(spec.kind), sev, run(&spec), N});
    }
  return rows;
}

void write_robustness_csv(const std::vector<RobustnessRow>& rows,
                          const std::string& model, std::uint64_t seed,
                          const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "model,seed,kind,severity,top1\n";
  for (const auto& r : rows)
    os << model << "," << seed << "," << r.kind << "," << r.severity << ","
       << r.top1 << "\n";
}

}  // namespace v1
