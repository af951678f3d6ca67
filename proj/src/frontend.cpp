#include "v1net/frontend.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

#include "v1net/conv_util.hpp"

namespace v1 {

void normalize_batch(Tensor& images) {
  for (float& x : images.v) x = (x - 0.5f) / 0.5f;
}

Tensor conv_forward(const FilterBank& bank, const Tensor& images) {
  if (images.shape.size() != 4 || images.dim(1) != 3)
    throw std::invalid_argument("conv_forward expects [B,3,H,W] images");
  const int B = images.dim(0), H = images.dim(2), W = images.dim(3);
  const int k = bank.kernel_size, stride = bank.stride, pad = (k - 1) / 2;
  if (H < 1 || W < 1) throw std::invalid_argument("empty image");
  const int oh = conv_out_size(H, k, stride, pad);
  const int ow = conv_out_size(W, k, stride, pad);
  const int nk = bank.num_kernels();
  const int K = k * k, N = oh * ow;

  Tensor out({B, nk, oh, ow});
  // The bank replicates one 2-D kernel over the 3 input channels with weight
  // 1/3, so the 3-channel convolution equals a single-channel convolution of
  // the channel mean with the unit-norm kernels.
  std::vector<float> lum(static_cast<std::size_t>(H) * W);
  std::vector<float> col(static_cast<std::size_t>(K) * N);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int b = 0; b < B; ++b) {
    const float* img = images.data() + static_cast<std::size_t>(b) * 3 * plane;
    for (std::size_t i = 0; i < plane; ++i)
      lum[i] = (img[i] + img[plane + i] + img[2 * plane + i]) / 3.0f;
    im2col(lum.data(), 1, H, W, k, stride, pad, col.data());
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, nk, N, K, 1.0f,
                bank.kernels2d.data(), K, col.data(), N, 0.0f,
                out.data() + static_cast<std::size_t>(b) * nk * N, N);
  }
  return out;
}

Tensor apply_nonlinearities(const Tensor& raw, const FilterBank& bank) {
  if (raw.shape.size() != 4 || raw.dim(1) != bank.num_kernels())
    throw std::invalid_argument(
        "apply_nonlinearities: raw kernel count does not match bank");
  const int B = raw.dim(0), oh = raw.dim(2), ow = raw.dim(3);
  const int nc = bank.num_channels();
  const std::size_t N = static_cast<std::size_t>(oh) * ow;
  Tensor out({B, nc, oh, ow});

  // Output channel order: all Simple then all Complex.
  int simple_seen = 0, complex_seen = 0;
  std::vector<int> out_index(bank.descriptors.size());
  for (std::size_t c = 0; c < bank.descriptors.size(); ++c)
    out_index[c] = (bank.descriptors[c].cell_type == CellType::Simple)
                       ? simple_seen++
                       : bank.n_simple + complex_seen++;

  for (int b = 0; b < B; ++b) {
    const float* rb = raw.data() + static_cast<std::size_t>(b) * raw.dim(1) * N;
    float* ob = out.data() + static_cast<std::size_t>(b) * nc * N;
    for (std::size_t c = 0; c < bank.descriptors.size(); ++c) {
      const int koff = bank.kernel_offset[c];
      float* dst = ob + static_cast<std::size_t>(out_index[c]) * N;
      if (bank.descriptors[c].cell_type == CellType::Simple) {
        const float* q = rb + static_cast<std::size_t>(koff) * N;
        for (std::size_t i = 0; i < N; ++i) dst[i] = q[i] > 0.0f ? q[i] : 0.0f;
      } else {
        const float* q0 = rb + static_cast<std::size_t>(koff) * N;
        const float* q1 = rb + static_cast<std::size_t>(koff + 1) * N;
        for (std::size_t i = 0; i < N; ++i)
          dst[i] = std::sqrt((q0[i] * q0[i] + q1[i] * q1[i]) * 0.5f);
      }
    }
  }
  return out;
}

Tensor vone_forward(const FilterBank& bank, const Tensor& images) {
  // Image-at-a-time composition of conv_forward + apply_nonlinearities so the
  // raw quadrature responses never materialize for the whole batch.
  if (images.shape.size() != 4 || images.dim(1) != 3)
    throw std::invalid_argument("vone_forward expects [B,3,H,W] images");
  const int B = images.dim(0), H = images.dim(2), W = images.dim(3);
  Tensor one({1, 3, H, W});
  const std::size_t img_sz = one.size();
  Tensor out;
  for (int b = 0; b < B; ++b) {
    std::copy(images.data() + b * img_sz, images.data() + (b + 1) * img_sz,
              one.data());
    Tensor acts = apply_nonlinearities(conv_forward(bank, one), bank);
    if (b == 0) {
      out = Tensor({B, acts.dim(1), acts.dim(2), acts.dim(3)});
    }
    std::copy(acts.v.begin(), acts.v.end(),
              out.v.begin() + static_cast<std::size_t>(b) * acts.size());
  }
  return out;
}

}  // namespace v1
