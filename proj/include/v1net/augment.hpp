#pragma once

#include "v1net/rng.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

struct AugmentDraws {
  double scale = 1.0;   // [1, 1.2], center crop back to input size
  double angle = 0.0;   // degrees, [-30, 30]
  bool flip = false;    // horizontal
  double shift_x = 0.0; // pixels, [-5%, 5%] of width
  double shift_y = 0.0; // pixels, [-5%, 5%] of height
};

AugmentDraws draw_augment(Rng& rng, int H, int W);

// Single combined affine warp (bilinear, zero fill). Input and output are
// [3,H,W] in [0,1]; output stays in [0,1].
void augment_image(const float* in, float* out, int H, int W,
                   const AugmentDraws& d);

// Geometric augmentation followed by (x - 0.5)/0.5 normalization.
void augment(const float* in, float* out, int H, int W, Rng& rng);

}  // namespace v1
