#include "ia2u/tasks/metrics.hpp"

#include "ia2u/core/error.hpp"

#include <cmath>
#include <sstream>

namespace ia2u::tasks {
namespace {

namespace F = torch::nn::functional;

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) {
        std::ostringstream os;
        os << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
        throw ValidationError(os.str());
    }
}

}  // namespace

torch::Tensor gaussian_window(torch::Dtype dtype) {
    auto coords = torch::arange(kSsimWindow, torch::TensorOptions().dtype(torch::kFloat64)) - (kSsimWindow - 1) / 2.0;
    auto g = torch::exp(-coords.pow(2) / (2.0 * kSsimSigma * kSsimSigma));
    g = g / g.sum();
    return torch::outer(g, g).to(dtype);
}

torch::Tensor ssim_per_image(const torch::Tensor& a, const torch::Tensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.dim() != 4) {
        throw ValidationError("ssim expects (batch, C, H, W) tensors");
    }
    if (a.size(2) < kSsimWindow || a.size(3) < kSsimWindow) {
        throw ValidationError("ssim needs images of at least 11x11 pixels");
    }
    const int64_t channels = a.size(1);
    const auto window = gaussian_window(a.scalar_type())
                            .view({1, 1, kSsimWindow, kSsimWindow})
                            .expand({channels, 1, kSsimWindow, kSsimWindow})
                            .contiguous();
    auto filter = [&](const torch::Tensor& t) {
        return F::conv2d(t, window, F::Conv2dFuncOptions().groups(channels));
    };
    constexpr double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    constexpr double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    const auto mu_a = filter(a);
    const auto mu_b = filter(b);
    const auto mu_ab = mu_a * mu_b;
    const auto mu_aa = mu_a * mu_a;
    const auto mu_bb = mu_b * mu_b;
    const auto var_a = filter(a * a) - mu_aa;
    const auto var_b = filter(b * b) - mu_bb;
    const auto cov = filter(a * b) - mu_ab;
    const auto map = ((2.0 * mu_ab + c1) * (2.0 * cov + c2)) / ((mu_aa + mu_bb + c1) * (var_a + var_b + c2));
    return map.mean({1, 2, 3});
}

torch::Tensor ssim_tensor(const torch::Tensor& a, const torch::Tensor& b) {
    return ssim_per_image(a, b).mean();
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
    torch::NoGradGuard no_grad;
    return ssim_tensor(a.data(), b.data()).item<double>();
}

torch::Tensor psnr_per_image(const torch::Tensor& a, const torch::Tensor& b) {
    require_same_shape(a, b, "psnr");
    torch::NoGradGuard no_grad;
    const auto mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean({1, 2, 3});
    return torch::clamp_max(10.0 * torch::log10(1.0 / mse), kPsnrCap);
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a.data(), b.data(), "psnr");
    torch::NoGradGuard no_grad;
    const double mse = (a.data().to(torch::kFloat64) - b.data().to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse == 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double combine_uie_loss(double l1, double ssim_value, const RunConfig& cfg) {
    return cfg.lambda_l1 * l1 + cfg.lambda_ssim * (1.0 - ssim_value);
}

torch::Tensor uie_loss(const torch::Tensor& pred, const torch::Tensor& ref, const RunConfig& cfg) {
    require_same_shape(pred, ref, "uie_loss");
    const auto l1 = (pred - ref).abs().mean();
    return cfg.lambda_l1 * l1 + cfg.lambda_ssim * (1.0 - ssim_tensor(pred, ref));
}

}  // namespace ia2u::tasks
