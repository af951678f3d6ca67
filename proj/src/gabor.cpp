#include "v1net/gabor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace v1 {

namespace {
constexpr char kMagic[4] = {'V', '1', 'B', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T x{};
  is.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!is) throw std::runtime_error("bank file truncated");
  return x;
}
}  // namespace

std::vector<float> make_gabor_kernel(const GaborParams& p, float ppd, int k,
                                     bool* aliasing) {
  if (k <= 0 || k % 2 == 0)
    throw std::invalid_argument("gabor kernel size must be odd and positive");
  if (ppd <= 0.0f) throw std::invalid_argument("ppd must be positive");
  if (p.sf <= 0.0f || p.nx <= 0.0f || p.ny <= 0.0f)
    throw std::invalid_argument("sf, nx, ny must be positive");

  double theta = std::fmod(static_cast<double>(p.theta), 180.0);
  if (theta < 0.0) theta += 180.0;
  const double th = theta * M_PI / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const double sx = static_cast<double>(p.nx) / p.sf;  // degrees
  const double sy = static_cast<double>(p.ny) / p.sf;
  if (aliasing) *aliasing = (sx * ppd < 1.0) || (sy * ppd < 1.0);

  const int c = k / 2;
  std::vector<float> out(static_cast<std::size_t>(k) * k);
  for (int y = 0; y < k; ++y) {
    for (int x = 0; x < k; ++x) {
      const double dx = (x - c) / static_cast<double>(ppd);
      const double dy = (y - c) / static_cast<double>(ppd);
      const double xr = dx * ct + dy * st;
      const double yr = -dx * st + dy * ct;
      const double env =
          std::exp(-(xr * xr / (2.0 * sx * sx) + yr * yr / (2.0 * sy * sy)));
      const double g = env * std::cos(2.0 * M_PI * p.sf * xr + p.phase);
      out[static_cast<std::size_t>(y) * k + x] = static_cast<float>(g);
    }
  }
  double norm2 = 0.0;
  for (float v : out) norm2 += static_cast<double>(v) * v;
  if (norm2 <= 0.0) throw std::runtime_error("degenerate gabor kernel (zero norm)");
  const double inv = 1.0 / std::sqrt(norm2);
  for (float& v : out) v = static_cast<float>(v * inv);
  return out;
}

FilterBank build_filter_bank(const std::vector<ChannelDescriptor>& descriptors,
                             const BankGeometry& geom) {
  if (descriptors.empty())
    throw std::invalid_argument("descriptor list must be non-empty");
  FilterBank fb;
  fb.ppd = geom.ppd;
  fb.stride = geom.stride;
  fb.kernel_size = geom.kernel_size;
  fb.descriptors = descriptors;
  const int k = geom.kernel_size;
  const std::size_t ksz = static_cast<std::size_t>(k) * k;

  for (const auto& d : descriptors) {
    fb.kernel_offset.push_back(static_cast<int>(fb.kernels2d.size() / ksz));
    bool alias = false;
    auto k0 = make_gabor_kernel(d.params, geom.ppd, k, &alias);
    fb.kernels2d.insert(fb.kernels2d.end(), k0.begin(), k0.end());
    fb.aliasing_flag.push_back(alias);
    if (d.cell_type == CellType::Complex) {
      GaborParams q = d.params;
      q.phase = d.params.phase + static_cast<float>(M_PI / 2.0);
      bool alias_q = false;
      auto k1 = make_gabor_kernel(q, geom.ppd, k, &alias_q);
      fb.kernels2d.insert(fb.kernels2d.end(), k1.begin(), k1.end());
      fb.aliasing_flag.push_back(alias_q);
      ++fb.n_complex;
    } else {
      ++fb.n_simple;
    }
  }

  // Replicate each kernel on the 3 input channels with weight 1/3
  // (luminance pooling).
  const int nk = fb.num_kernels();
  fb.kernels.resize(static_cast<std::size_t>(nk) * 3 * ksz);
  for (int j = 0; j < nk; ++j) {
    const float* src = fb.kernels2d.data() + static_cast<std::size_t>(j) * ksz;
    for (int ch = 0; ch < 3; ++ch) {
      float* dst = fb.kernels.data() + (static_cast<std::size_t>(j) * 3 + ch) * ksz;
      for (std::size_t i = 0; i < ksz; ++i) dst[i] = src[i] / 3.0f;
    }
  }
  return fb;
}

std::uint64_t FilterBank::checksum() const {
  std::uint64_t h = fnv1a(kernels.data(), kernels.size() * sizeof(float));
  h = fnv1a(&ppd, sizeof(ppd), h);
  h = fnv1a(&stride, sizeof(stride), h);
  h = fnv1a(&kernel_size, sizeof(kernel_size), h);
  return h;
}

void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, bank.ppd);
  write_pod(os, static_cast<std::uint32_t>(bank.stride));
  write_pod(os, static_cast<std::uint32_t>(bank.kernel_size));
  write_pod(os, static_cast<std::uint32_t>(bank.n_simple));
  write_pod(os, static_cast<std::uint32_t>(bank.n_complex));
  for (const auto& d : bank.descriptors) {
    write_pod(os, static_cast<std::uint32_t>(d.channel_index));
    write_pod(os, static_cast<std::uint8_t>(d.cell_type));
    write_pod(os, d.params.theta);
    write_pod(os, d.params.sf);
    write_pod(os, d.params.phase);
    write_pod(os, d.params.nx);
    write_pod(os, d.params.ny);
  }
  write_pod(os, static_cast<std::uint32_t>(bank.num_kernels()));
  os.write(reinterpret_cast<const char*>(bank.kernels.data()),
           static_cast<std::streamsize>(bank.kernels.size() * sizeof(float)));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

FilterBank load_filter_bank(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a filter bank container: " + path.string());
  if (read_pod<std::uint32_t>(is) != kVersion)
    throw std::runtime_error("unsupported bank version");
  BankGeometry geom;
  geom.ppd = read_pod<float>(is);
  geom.stride = static_cast<int>(read_pod<std::uint32_t>(is));
  geom.kernel_size = static_cast<int>(read_pod<std::uint32_t>(is));
  const int n_simple = static_cast<int>(read_pod<std::uint32_t>(is));
  const int n_complex = static_cast<int>(read_pod<std::uint32_t>(is));
  std::vector<ChannelDescriptor> descs(n_simple + n_complex);
  for (auto& d : descs) {
    d.channel_index = static_cast<int>(read_pod<std::uint32_t>(is));
    d.cell_type = static_cast<CellType>(read_pod<std::uint8_t>(is));
    d.params.theta = read_pod<float>(is);
    d.params.sf = read_pod<float>(is);
    d.params.phase = read_pod<float>(is);
    d.params.nx = read_pod<float>(is);
    d.params.ny = read_pod<float>(is);
  }
  const int nk = static_cast<int>(read_pod<std::uint32_t>(is));
  // Kernels are regenerated from the descriptors (bit-exact); the stored
  // array is read back and must agree.
  FilterBank fb = build_filter_bank(descs, geom);
  if (fb.num_kernels() != nk)
    throw std::runtime_error("bank kernel count mismatch");
  std::vector<float> stored(fb.kernels.size());
  is.read(reinterpret_cast<char*>(stored.data()),
          static_cast<std::streamsize>(stored.size() * sizeof(float)));
  if (!is) throw std::runtime_error("bank file truncated");
  if (std::memcmp(stored.data(), fb.kernels.data(),
                  stored.size() * sizeof(float)) != 0)
    throw std::runtime_error("stored kernels disagree with descriptors");
  return fb;
}

void dump_kernels_pgm(const FilterBank& bank, const std::filesystem::path& dir,
                      int limit) {
  std::filesystem::create_directories(dir);
  const int k = bank.kernel_size;
  const std::size_t ksz = static_cast<std::size_t>(k) * k;
  int n = bank.num_kernels();
  if (limit >= 0 && limit < n) n = limit;
  for (int j = 0; j < n; ++j) {
    const float* w = bank.kernel2d(j);
    float lo = w[0], hi = w[0];
    for (std::size_t i = 0; i < ksz; ++i) {
      lo = std::min(lo, w[i]);
      hi = std::max(hi, w[i]);
    }
    const float range = (hi > lo) ? hi - lo : 1.0f;
    char name[32];
    std::snprintf(name, sizeof(name), "kernel_%04d.pgm", j);
    std::ofstream os(dir / name, std::ios::binary);
    os << "P5\n" << k << " " << k << "\n255\n";
    for (std::size_t i = 0; i < ksz; ++i) {
      const int g = static_cast<int>(std::lround(255.0f * (w[i] - lo) / range));
      os.put(static_cast<char>(g));
    }
  }
}

}  // namespace v1
