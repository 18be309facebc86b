#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace ia2u {

/// Batch of RGB images laid out (batch, 3, H, W) with values in [0, 1].
///
/// H and W are at least 16 and divisible by 8 so that every 1/2 and 1/4
/// resampling used downstream is exact. Construction validates the shape,
/// finiteness and range; the wrapped tensor may carry autograd history.
class ImageTensor {
public:
    static constexpr int64_t kChannels = 3;
    static constexpr int64_t kMinSide = 16;
    static constexpr int64_t kSideMultiple = 8;

    /// Validates `data` and wraps it. Throws ValidationError.
    explicit ImageTensor(torch::Tensor data);

    const torch::Tensor& data() const noexcept { return data_; }
    int64_t batch() const { return data_.size(0); }
    int64_t height() const { return data_.size(2); }
    int64_t width() const { return data_.size(3); }

private:
    torch::Tensor data_;
};

/// Intermediate activation (batch, C, h, w) tagged with its downsample factor.
class FeatureMap {
public:
    /// `scale` is the integer factor relative to the network input, so that
    /// h == input_h / scale. Throws ValidationError on a non-4D tensor,
    /// non-positive scale or non-finite entries.
    FeatureMap(torch::Tensor data, int64_t scale);

    const torch::Tensor& data() const noexcept { return data_; }
    int64_t scale() const noexcept { return scale_; }
    int64_t channels() const { return data_.size(1); }
    int64_t height() const { return data_.size(2); }
    int64_t width() const { return data_.size(3); }

    /// Throws ValidationError unless h == input_h / scale and w == input_w / scale.
    void check_matches_input(int64_t input_h, int64_t input_w) const;

private:
    torch::Tensor data_;
    int64_t scale_;
};

/// Clamps every entry into [0, 1]. Throws ValidationError naming the first
/// non-finite entry by its multi-index.
ImageTensor clamp_image(const torch::Tensor& x);

/// Throws ValidationError naming the first non-finite entry of `t`.
void require_finite(const torch::Tensor& t, const char* what);

}  // namespace ia2u
