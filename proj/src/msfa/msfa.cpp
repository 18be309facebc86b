#include "ia2u/msfa/msfa.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/ops.hpp"

#include <sstream>

namespace ia2u::msfa {
namespace {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

std::string shape_of(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

nn::Conv2d pointwise(int64_t in, int64_t out) {
    nn::Conv2d conv(nn::Conv2dOptions(in, out, 1));
    torch::NoGradGuard no_grad;
    conv->bias.zero_();
    return conv;
}

nn::Conv2d depthwise(int64_t channels, int64_t kernel) {
    nn::Conv2d conv(nn::Conv2dOptions(channels, channels, kernel).padding(kernel / 2).groups(channels));
    torch::NoGradGuard no_grad;
    conv->bias.zero_();
    return conv;
}

}  // namespace

bool is_scale_factor(int64_t f) {
    return f == 1 || f == 2 || f == 4;
}

torch::Tensor align_tensor(const torch::Tensor& s, int64_t from, int64_t to) {
    if (!is_scale_factor(from) || !is_scale_factor(to)) {
        throw ValidationError("unsupported alignment " + std::to_string(from) + " -> " + std::to_string(to) +
                              " (factors must be 1, 2 or 4)");
    }
    if (from == to) {
        return s;
    }
    if (to < from) {
        const int64_t up = from / to;
        return resize_bilinear(s, s.size(2) * up, s.size(3) * up);
    }
    const int64_t down = to / from;
    if (s.size(2) % down != 0 || s.size(3) % down != 0) {
        throw ValidationError("feature of shape " + shape_of(s) + " cannot be pooled by " + std::to_string(down));
    }
    return F::avg_pool2d(s, F::AvgPool2dFuncOptions(down).stride(down));
}

FeatureMap sample_align(const FeatureMap& s, int64_t target_scale) {
    return FeatureMap(align_tensor(s.data(), s.scale(), target_scale), target_scale);
}

MultiScaleExtractorImpl::MultiScaleExtractorImpl(int64_t channels, bool full_scale, int64_t anchor_scale)
    : channels_(channels), full_scale_(full_scale), anchor_scale_(anchor_scale) {
    if (!is_scale_factor(anchor_scale)) {
        throw ValidationError("anchor scale must be 1, 2 or 4");
    }
    for (size_t k = 0; k < kKernels.size(); ++k) {
        dwc_[k] = register_module("dwc" + std::to_string(kKernels[k]), depthwise(channels, kKernels[k]));
    }
    mlp_ = register_module("mlp", nn::Sequential(pointwise(3 * channels, channels), nn::GELU(),
                                                 pointwise(channels, channels)));
}

std::array<torch::Tensor, 3> MultiScaleExtractorImpl::scale_set(const torch::Tensor& f) {
    std::array<torch::Tensor, 3> s;
    for (size_t k = 0; k < kFactors.size(); ++k) {
        s[k] = dwc_[k]->forward(align_tensor(f, 1, kFactors[k]));
    }
    return s;
}

torch::Tensor MultiScaleExtractorImpl::forward(const torch::Tensor& f) {
    if (f.dim() != 4 || f.size(1) != channels_) {
        throw ValidationError("multi-scale extractor expects (batch, " + std::to_string(channels_) +
                              ", h, w), got " + shape_of(f));
    }
    if (f.size(2) % 4 != 0 || f.size(3) % 4 != 0) {
        throw ValidationError("multi-scale extractor needs h and w divisible by 4, got " + shape_of(f));
    }
    const auto s = scale_set(f);
    auto refine_at = [&](int64_t target) {
        std::vector<torch::Tensor> aligned;
        for (size_t k = 0; k < kFactors.size(); ++k) {
            aligned.push_back(align_tensor(s[k], kFactors[k], target));
        }
        const auto refined = mlp_->forward(torch::cat(aligned, 1));
        // Per-channel weight from global average pooling, broadcast over space.
        const auto weight = refined.mean({2, 3}, /*keepdim=*/true);
        return align_tensor(refined * weight, target, 1);
    };
    if (!full_scale_) {
        return refine_at(anchor_scale_);
    }
    torch::Tensor out;
    for (const auto target : kFactors) {
        auto term = refine_at(target);
        out = out.defined() ? out + term : term;
    }
    return out;
}

PriorAttentionImpl::PriorAttentionImpl(int64_t channels, int64_t segments)
    : channels_(channels), segments_(segments) {
    if (segments <= 0 || channels % segments != 0) {
        throw ValidationError("attention segments (" + std::to_string(segments) + ") must divide channels (" +
                              std::to_string(channels) + ")");
    }
    key_ = register_module("key", pointwise(channels, channels));
    value_ = register_module("value", pointwise(channels, channels));
}

AttentionOutput PriorAttentionImpl::gate(const torch::Tensor& k, const torch::Tensor& v,
                                         const torch::Tensor& p) const {
    const int64_t b = k.size(0), h = k.size(2), w = k.size(3);
    const std::vector<int64_t> segmented = {b, segments_, channels_ / segments_, h, w};
    const auto mask = torch::sigmoid(k.reshape(segmented) * p.reshape(segmented));
    const auto out = mask * v.reshape(segmented);
    return {out.reshape({b, channels_, h, w}), mask.reshape({b, channels_, h, w}), v};
}

AttentionOutput PriorAttentionImpl::attend(const torch::Tensor& f1, const torch::Tensor& p) {
    if (f1.sizes() != p.sizes()) {
        throw ValidationError("attention input " + shape_of(f1) + " and prior " + shape_of(p) + " differ in shape");
    }
    if (f1.dim() != 4 || f1.size(1) != channels_) {
        throw ValidationError("attention expects (batch, " + std::to_string(channels_) + ", h, w), got " +
                              shape_of(f1));
    }
    return gate(key_->forward(f1), value_->forward(f1), p);
}

MSFABlockImpl::MSFABlockImpl(const RunConfig& cfg) {
    cfg.validate();
    msfe_ = register_module("msfe", MultiScaleExtractor(cfg.channels, cfg.enable_full_scale, cfg.anchor_scale));
    attention_ = register_module("attention", PriorAttention(cfg.channels, cfg.attention_segments));
}

torch::Tensor MSFABlockImpl::forward(const torch::Tensor& f, const torch::Tensor& p) {
    return attention_->forward(msfe_->forward(f), p);
}

FeatureMap msfa_block(MSFABlock& block, const FeatureMap& f, const FeatureMap& fused_prior) {
    if (fused_prior.scale() != f.scale()) {
        throw ValidationError("prior scale " + std::to_string(fused_prior.scale()) + " differs from feature scale " +
                              std::to_string(f.scale()));
    }
    return FeatureMap(block->forward(f.data(), fused_prior.data()), f.scale());
}

}  // namespace ia2u::msfa
