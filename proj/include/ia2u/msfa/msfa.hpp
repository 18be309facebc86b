#pragma once

#include "ia2u/core/config.hpp"
#include "ia2u/core/tensor_types.hpp"

#include <torch/torch.h>

#include <array>

namespace ia2u::msfa {

/// Spatial downsample factors of the three scale branches, relative to the
/// block input. Branch k uses a depth-wise kernel of size kKernels[k].
inline constexpr std::array<int64_t, 3> kFactors = {1, 2, 4};
inline constexpr std::array<int64_t, 3> kKernels = {1, 3, 5};

/// True for factors the alignment supports: 1, 2 and 4.
bool is_scale_factor(int64_t f);

/// Resamples `s`, currently at downsample factor `from`, to factor `to`:
/// identity when equal, bilinear upsampling when `to` is finer, average
/// pooling when `to` is coarser. Throws ValidationError for factors outside
/// {1, 2, 4} or spatial sizes that do not resample exactly.
torch::Tensor align_tensor(const torch::Tensor& s, int64_t from, int64_t to);

/// FeatureMap form of align_tensor; factors are the maps' own scales.
FeatureMap sample_align(const FeatureMap& s, int64_t target_scale);

/// Multi-scale feature extraction with full-scale (or single-anchor) alignment.
class MultiScaleExtractorImpl : public torch::nn::Module {
public:
    MultiScaleExtractorImpl(int64_t channels, bool full_scale, int64_t anchor_scale);

    /// Output has the input's shape. Throws ValidationError when h or w is
    /// not divisible by 4 or the channel count differs.
    torch::Tensor forward(const torch::Tensor& f);

    /// S_1, S_3, S_5 at factors 1, 2, 4.
    std::array<torch::Tensor, 3> scale_set(const torch::Tensor& f);

    bool full_scale() const { return full_scale_; }

private:
    int64_t channels_;
    bool full_scale_;
    int64_t anchor_scale_;
    std::array<torch::nn::Conv2d, 3> dwc_{nullptr, nullptr, nullptr};
    torch::nn::Sequential mlp_{nullptr};
};
TORCH_MODULE(MultiScaleExtractor);

struct AttentionOutput {
    torch::Tensor output;  // F2 = M * V
    torch::Tensor mask;    // M = sigmoid(K * P)
    torch::Tensor value;   // V = LT_v(F1)
};

/// Prior-gated attention: K and V are 1x1 projections of F1, channels are
/// split into n segments and each segment is gated by sigmoid(K * P).
class PriorAttentionImpl : public torch::nn::Module {
public:
    PriorAttentionImpl(int64_t channels, int64_t segments);

    torch::Tensor forward(const torch::Tensor& f1, const torch::Tensor& p) { return attend(f1, p).output; }

    /// Throws ValidationError when f1 and p differ in shape.
    AttentionOutput attend(const torch::Tensor& f1, const torch::Tensor& p);

    /// Gating with precomputed K and V; exposed for segment-level checks.
    AttentionOutput gate(const torch::Tensor& k, const torch::Tensor& v, const torch::Tensor& p) const;

    torch::nn::Conv2d& key() { return key_; }
    torch::nn::Conv2d& value() { return value_; }
    int64_t segments() const { return segments_; }

private:
    int64_t channels_;
    int64_t segments_;
    torch::nn::Conv2d key_{nullptr};
    torch::nn::Conv2d value_{nullptr};
};
TORCH_MODULE(PriorAttention);

/// MSFA block: prior_attention(msfe(f), P).
class MSFABlockImpl : public torch::nn::Module {
public:
    explicit MSFABlockImpl(const RunConfig& cfg);

    torch::Tensor forward(const torch::Tensor& f, const torch::Tensor& p);

    MultiScaleExtractor& extractor() { return msfe_; }
    PriorAttention& attention() { return attention_; }

private:
    MultiScaleExtractor msfe_{nullptr};
    PriorAttention attention_{nullptr};
};
TORCH_MODULE(MSFABlock);

/// FeatureMap entry point; the query is the fused prior of the block.
FeatureMap msfa_block(MSFABlock& block, const FeatureMap& f, const FeatureMap& fused_prior);

}  // namespace ia2u::msfa
