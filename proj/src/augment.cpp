#include "v1net/augment.hpp"

#include <cmath>

namespace v1 {

AugmentDraws draw_augment(Rng& rng, int H, int W) {
  AugmentDraws d;
  d.scale = rng.uniform(1.0, 1.2);
  d.angle = rng.uniform(-30.0, 30.0);
  d.flip = rng.bernoulli(0.5);
  d.shift_x = rng.uniform(-0.05, 0.05) * W;
  d.shift_y = rng.uniform(-0.05, 0.05) * H;
  return d;
}

void augment_image(const float* in, float* out, int H, int W,
                   const AugmentDraws& d) {
  // Forward op order: scale, rotate, flip, translate. The sampling map goes
  // the other way: output pixel -> input coordinate.
  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  const double a = d.angle * M_PI / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double inv_s = 1.0 / d.scale;
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double xo = x - cx - d.shift_x;
      double yo = y - cy - d.shift_y;
      if (d.flip) xo = -xo;
      // inverse rotation
      double xr = xo * ca + yo * sa;
      double yr = -xo * sa + yo * ca;
      const double xs = xr * inv_s + cx;
      const double ys = yr * inv_s + cy;

      const int x0 = static_cast<int>(std::floor(xs));
      const int y0 = static_cast<int>(std::floor(ys));
      const double fx = xs - x0, fy = ys - y0;
      for (int c = 0; c < 3; ++c) {
        const float* pc = in + c * plane;
        auto px = [&](int xi, int yi) -> double {
          if (xi < 0 || xi >= W || yi < 0 || yi >= H) return 0.0;
          return pc[static_cast<std::size_t>(yi) * W + xi];
        };
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) +
                         fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
        out[c * plane + static_cast<std::size_t>(y) * W + x] =
            static_cast<float>(v);
      }
    }
  }
}

void augment(const float* in, float* out, int H, int W, Rng& rng) {
  augment_image(in, out, H, W, draw_augment(rng, H, W));
  const std::size_t n = 3 * static_cast<std::size_t>(H) * W;
  for (std::size_t i = 0; i < n; ++i) out[i] = (out[i] - 0.5f) / 0.5f;
}

}  // namespace v1
