#pragma once

#include <torch/torch.h>

namespace ia2u {

inline constexpr double kInstanceNormEps = 1e-5;

/// Per-(sample, channel) normalization to zero mean and unit variance over
/// the spatial dims of a (batch, C, h, w) tensor, without affine parameters.
/// Channels that are exactly constant map to exact zeros.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = kInstanceNormEps);

/// Bilinear resize (half-pixel centers) to (h, w); identity when already that size.
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t h, int64_t w);

}  // namespace ia2u
