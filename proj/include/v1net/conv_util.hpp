#pragma once

#include <vector>

namespace v1 {

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// im2col for a [C,H,W] image: col is [C*k*k, oh*ow], zero padded.
inline void im2col(const float* x, int C, int H, int W, int k, int stride,
                   int pad, float* col) {
  const int oh = conv_out_size(H, k, stride, pad);
  const int ow = conv_out_size(W, k, stride, pad);
  const int N = oh * ow;
  for (int c = 0; c < C; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * N;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            for (int ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0f;
            continue;
          }
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (ix >= 0 && ix < W) ? xc[iy * W + ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col: col [C*k*k, oh*ow] back into dx [C,H,W].
inline void col2im_add(const float* col, int C, int H, int W, int k, int stride,
                       int pad, float* dx) {
  const int oh = conv_out_size(H, k, stride, pad);
  const int ow = conv_out_size(W, k, stride, pad);
  const int N = oh * ow;
  for (int c = 0; c < C; ++c) {
    float* xc = dx + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row =
            col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * N;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) xc[iy * W + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace v1
