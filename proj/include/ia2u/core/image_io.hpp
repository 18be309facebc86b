#pragma once

#include <torch/torch.h>

#include <string>

namespace ia2u {

/// Reads an 8-bit PNG (gray, RGB or RGBA) into a float (3, H, W) tensor in [0, 1].
torch::Tensor read_png(const std::string& path);

/// Writes a (3, H, W) or (1, H, W) tensor in [0, 1] as an 8-bit PNG,
/// rounding to the nearest code value. Throws IoError on failure.
void write_png(const std::string& path, const torch::Tensor& chw);

/// Nearest 8-bit code value of every entry, back in [0, 1].
torch::Tensor quantize_8bit(const torch::Tensor& x);

}  // namespace ia2u
