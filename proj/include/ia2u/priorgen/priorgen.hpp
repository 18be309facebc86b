#pragma once

#include "ia2u/classifier/classifier.hpp"
#include "ia2u/core/tensor_types.hpp"

#include <torch/torch.h>

#include <array>
#include <optional>
#include <vector>

namespace ia2u::priorgen {

/// Which priors contribute to the fused query (ablation switches).
struct PriorToggles {
    bool water = true;
    bool degrad = true;
    bool sample = true;

    bool any() const { return water || degrad || sample; }
};

/// Spatial target of a prior map.
struct TargetShape {
    int64_t height = 0;
    int64_t width = 0;
    int64_t scale = 1;
};

/// The three priors and their fusion, all shaped (batch, C, h, w).
/// Disabled priors are stored as zeros.
struct PriorBundle {
    FeatureMap p_water;
    FeatureMap p_degrad;
    FeatureMap p_sample;
    FeatureMap fused;
};

/// Broadcasts embedding row argmax(prob) of each sample over (h, w).
/// `embedding` is the (9, C) table. Only the selected rows receive gradient.
/// Throws ValidationError when prob contains NaN or is not (batch, 9).
FeatureMap water_prior(const torch::Tensor& prob, const torch::Tensor& embedding, TargetShape target);

/// Intermediate results of the degradation prior, exposed for inspection.
struct DegradationStages {
    torch::Tensor fused_norm;  // InstanceNorm(sum_i up_{2^i}(conv1x1(R_i))), stride 4
    torch::Tensor pre_relu;    // refine conv output, stride 4
    FeatureMap output;         // ReLU(pre_relu) resized to the target
};

/// Learnable parts of the prior generator: the water-type embedding table,
/// the per-stage 1x1 projections and the 1x1 refinement of the degradation
/// prior. Projection and refinement biases start at zero.
class PriorGeneratorImpl : public torch::nn::Module {
public:
    explicit PriorGeneratorImpl(int64_t channels);

    int64_t channels() const { return channels_; }
    torch::Tensor& embedding() { return embedding_; }
    const torch::Tensor& embedding() const { return embedding_; }
    torch::nn::Conv2d& refine() { return refine_; }

    /// Throws ValidationError unless the features are R_0..R_3 at scales 4, 8, 16, 32
    /// with the classifier's channel counts.
    DegradationStages degradation_stages(const std::vector<FeatureMap>& features, TargetShape target);

private:
    int64_t channels_;
    torch::Tensor embedding_;
    std::array<torch::nn::Conv2d, classifier::kNumStages> project_{nullptr, nullptr, nullptr, nullptr};
    torch::nn::Conv2d refine_{nullptr};
};
TORCH_MODULE(PriorGenerator);

/// P_degrad: ReLU(conv1x1(P1)) with P1 = InstanceNorm(sum of upsampled projections),
/// bilinearly resized to `target`.
FeatureMap degradation_prior(PriorGenerator& gen, const std::vector<FeatureMap>& features, TargetShape target);

/// P_sample is the block's input feature itself.
inline const FeatureMap& sample_prior(const FeatureMap& f_j) {
    return f_j;
}

/// Query P = InstanceNorm(sum of the enabled priors). Disabled priors are
/// ignored (equivalent to adding zeros) and may be absent. Throws
/// ValidationError when every prior is disabled, an enabled prior is
/// missing, or shapes differ.
FeatureMap fuse_priors(const std::optional<FeatureMap>& p_water, const std::optional<FeatureMap>& p_degrad,
                       const std::optional<FeatureMap>& p_sample, const PriorToggles& toggles);

/// Image-level priors computed once per input and reused by every block.
struct ImagePriors {
    std::optional<FeatureMap> water;
    std::optional<FeatureMap> degrad;
};

ImagePriors image_priors(PriorGenerator& gen, const classifier::WaterTypePrediction& pred, TargetShape target,
                         const PriorToggles& toggles);

/// Completes the bundle for one block from the image priors and its input f_j.
PriorBundle block_priors(const ImagePriors& image, const FeatureMap& f_j, const PriorToggles& toggles);

}  // namespace ia2u::priorgen
