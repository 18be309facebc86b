#include "ia2u/core/ops.hpp"

#include "ia2u/core/error.hpp"

namespace ia2u {

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
    if (x.dim() != 4) {
        throw ValidationError("instance_norm expects a (batch, C, h, w) tensor");
    }
    const auto mean = x.mean({2, 3}, /*keepdim=*/true);
    const auto centered = x - mean;
    const auto var = centered.pow(2).mean({2, 3}, /*keepdim=*/true);
    const auto out = centered * torch::rsqrt(var + eps);
    const auto constant = (x.amax({2, 3}, true) - x.amin({2, 3}, true)) == 0;
    return torch::where(constant, torch::zeros_like(out), out);
}

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t h, int64_t w) {
    if (x.size(2) == h && x.size(3) == w) {
        return x;
    }
    namespace F = torch::nn::functional;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{h, w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

}  // namespace ia2u
