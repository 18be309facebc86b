#include "ia2u/core/tensor_types.hpp"

#include "ia2u/core/error.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace ia2u {
namespace {

std::string format_index(int64_t flat, c10::IntArrayRef sizes) {
    std::vector<int64_t> idx(sizes.size());
    for (int64_t d = static_cast<int64_t>(sizes.size()) - 1; d >= 0; --d) {
        idx[d] = flat % sizes[d];
        flat /= sizes[d];
    }
    std::ostringstream os;
    os << '(';
    for (size_t d = 0; d < idx.size(); ++d) {
        os << (d ? "," : "") << idx[d];
    }
    os << ')';
    return os.str();
}

std::string format_shape(c10::IntArrayRef sizes) {
    std::ostringstream os;
    os << sizes;
    return os.str();
}

}  // namespace

void require_finite(const torch::Tensor& t, const char* what) {
    torch::NoGradGuard no_grad;
    // A finite sum rules out NaN and inf; only otherwise locate the offender.
    if (std::isfinite(t.sum(torch::kDouble).item<double>())) {
        return;
    }
    auto bad = torch::logical_not(torch::isfinite(t)).flatten();
    if (!bad.any().item<bool>()) {
        return;
    }
    const int64_t flat = bad.nonzero()[0].item<int64_t>();
    throw ValidationError(std::string(what) + ": non-finite value at index " +
                          format_index(flat, t.sizes()));
}

ImageTensor::ImageTensor(torch::Tensor data) : data_(std::move(data)) {
    if (!data_.defined() || data_.dim() != 4) {
        throw ValidationError("image tensor must be 4-D (batch, 3, H, W)");
    }
    if (data_.size(1) != kChannels) {
        throw ValidationError("image tensor must have 3 channels, got shape " +
                              format_shape(data_.sizes()));
    }
    const int64_t h = data_.size(2);
    const int64_t w = data_.size(3);
    if (h < kMinSide || w < kMinSide || h % kSideMultiple != 0 || w % kSideMultiple != 0) {
        throw ValidationError("image height and width must be >= 16 and divisible by 8, got " +
                              format_shape(data_.sizes()));
    }
    require_finite(data_, "image");
    torch::NoGradGuard no_grad;
    if (data_.numel() > 0) {
        const auto [lo, hi] = torch::aminmax(data_);
        if (lo.item<double>() < 0.0 || hi.item<double>() > 1.0) {
            throw ValidationError("image values must lie in [0, 1]; use clamp_image first");
        }
    }
}

FeatureMap::FeatureMap(torch::Tensor data, int64_t scale) : data_(std::move(data)), scale_(scale) {
    if (!data_.defined() || data_.dim() != 4) {
        throw ValidationError("feature map must be 4-D (batch, C, h, w)");
    }
    if (scale_ <= 0) {
        throw ValidationError("feature map scale must be positive");
    }
    require_finite(data_, "feature map");
}

void FeatureMap::check_matches_input(int64_t input_h, int64_t input_w) const {
    if (input_h % scale_ != 0 || input_w % scale_ != 0 || height() != input_h / scale_ ||
        width() != input_w / scale_) {
        throw ValidationError("feature map of shape " + format_shape(data_.sizes()) +
                              " does not match scale " + std::to_string(scale_) + " of input " +
                              std::to_string(input_h) + "x" + std::to_string(input_w));
    }
}

ImageTensor clamp_image(const torch::Tensor& x) {
    require_finite(x, "clamp_image");
    return ImageTensor(torch::clamp(x, 0.0, 1.0));
}

}  // namespace ia2u
