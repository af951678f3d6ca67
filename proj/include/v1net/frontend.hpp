#pragma once

#include "v1net/gabor.hpp"
#include "v1net/tensor.hpp"

namespace v1 {

// (x - 0.5) / 0.5 per channel, in place.
void normalize_batch(Tensor& images);

// Strided cross-correlation of a [B,3,H,W] batch with the bank.
// Zero padding (k-1)/2, so the output spatial size is ceil(H/stride).
// Returns raw responses [B, num_kernels, oh, ow].
Tensor conv_forward(const FilterBank& bank, const Tensor& images);

// Simple channel: max(0, raw). Complex channel: sqrt((q0^2 + q90^2)/2) from
// its quadrature pair. Output channels: all Simple then all Complex.
Tensor apply_nonlinearities(const Tensor& raw, const FilterBank& bank);

Tensor vone_forward(const FilterBank& bank, const Tensor& images);

}  // namespace v1
