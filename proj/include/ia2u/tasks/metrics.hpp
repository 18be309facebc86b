#pragma once

#include "ia2u/core/config.hpp"
#include "ia2u/core/tensor_types.hpp"

#include <torch/torch.h>

namespace ia2u::tasks {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
/// PSNR reported for identical images (and the ceiling for all values).
inline constexpr double kPsnrCap = 100.0;

/// Normalized 11x11 Gaussian window (sigma 1.5) in the given dtype.
torch::Tensor gaussian_window(torch::Dtype dtype = torch::kFloat32);

/// Mean SSIM of each image over channels and valid window positions,
/// dynamic range 1. Differentiable. Inputs are (batch, C, H, W) tensors.
/// Throws ValidationError on shape mismatch or images smaller than the window.
torch::Tensor ssim_per_image(const torch::Tensor& a, const torch::Tensor& b);

/// Mean of ssim_per_image as a 0-d tensor.
torch::Tensor ssim_tensor(const torch::Tensor& a, const torch::Tensor& b);

double ssim(const ImageTensor& a, const ImageTensor& b);

/// 10 log10(1 / MSE) for each image, capped at kPsnrCap (MSE = 0 gives the cap).
torch::Tensor psnr_per_image(const torch::Tensor& a, const torch::Tensor& b);

/// PSNR of the whole batch treated as one signal.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// lambda_l1 * l1 + lambda_ssim * (1 - ssim_value).
double combine_uie_loss(double l1, double ssim_value, const RunConfig& cfg);

/// lambda_l1 * mean|pred - ref| + lambda_ssim * (1 - SSIM(pred, ref)), differentiable.
/// Throws ValidationError on shape mismatch.
torch::Tensor uie_loss(const torch::Tensor& pred, const torch::Tensor& ref, const RunConfig& cfg);

}  // namespace ia2u::tasks
