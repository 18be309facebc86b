#pragma once

#include "ia2u/core/config.hpp"
#include "ia2u/core/tensor_types.hpp"
#include "ia2u/watersim/corpus.hpp"

#include <torch/torch.h>

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace ia2u::classifier {

inline constexpr int kNumStages = 4;
inline constexpr std::array<int64_t, kNumStages> kStageChannels = {16, 32, 48, 64};
/// Stage i output has stride kStageScale[i] = 4 * 2^i relative to the input.
inline constexpr std::array<int64_t, kNumStages> kStageScale = {4, 8, 16, 32};
/// Input colour statistics (mean and std per RGB channel) and their embedding width.
inline constexpr int64_t kColourStats = 6;
inline constexpr int64_t kColourEmbed = 32;

/// Four-stage water-type CNN: a stride-4 stem followed by three stride-2
/// stages, instance-normalized throughout, and a linear head over the
/// globally pooled last stage concatenated with an embedding of the
/// per-channel mean and standard deviation of the input. Instance norm
/// discards the global colour cast, so the head gets it back from the input
/// statistics.
class WaterClassifierImpl : public torch::nn::Module {
public:
    WaterClassifierImpl();

    struct Output {
        torch::Tensor logits;                       // (batch, 9)
        std::array<torch::Tensor, kNumStages> stages;  // R_0 .. R_3
    };

    Output forward(const torch::Tensor& x);

private:
    torch::nn::Sequential stem_{nullptr};
    std::array<torch::nn::Sequential, kNumStages - 1> stages_{nullptr, nullptr, nullptr};
    torch::nn::Linear colour_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(WaterClassifier);

/// Classifier parameters plus the frozen flag. Copies share parameters.
class ClassifierWeights {
public:
    ClassifierWeights();
    explicit ClassifierWeights(WaterClassifier net, bool frozen = false);

    WaterClassifier& net() { return net_; }
    const WaterClassifier& net() const { return net_; }
    bool frozen() const { return frozen_; }

private:
    WaterClassifier net_;
    bool frozen_ = false;
};

struct WaterTypePrediction {
    torch::Tensor logits;  // (batch, 9)
    torch::Tensor prob;    // (batch, 9), rows sum to 1
    std::vector<FeatureMap> features;  // R_0 .. R_3 at scales 4, 8, 16, 32
};

/// Runs the classifier. Frozen weights are evaluated without autograd so no
/// gradient can reach them. Throws ValidationError unless H and W are
/// divisible by 32.
WaterTypePrediction classify(const ImageTensor& x, const ClassifierWeights& w);

/// Softmax over the last dimension.
torch::Tensor logits_to_prob(const torch::Tensor& logits);

/// Marks the weights frozen and detaches every parameter from autograd.
ClassifierWeights freeze(ClassifierWeights w);

struct ClassifierEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double val_top1 = 0.0;
};

struct ClassifierTraining {
    ClassifierWeights weights;
    std::vector<ClassifierEpoch> epochs;
    std::vector<double> step_losses;
};

/// Top-1 accuracy of `w` on (images, labels), evaluated in mini-batches.
double top1_accuracy(const ClassifierWeights& w, const torch::Tensor& images, const torch::Tensor& labels);

/// Cross-entropy training with AdamW (weight decay, betas from cfg) under
/// core::cosine_warmup_lr. Reports validation top-1 after every epoch through
/// `on_epoch` when given. Without `init`, parameters are freshly initialized
/// from cfg.seed. Throws ValidationError on an empty training split and
/// std::logic_error when `init` is frozen.
ClassifierTraining train_classifier(const watersim::LoadedSplit& train, const watersim::LoadedSplit& val,
                                    const RunConfig& cfg,
                                    const std::function<void(const ClassifierEpoch&)>& on_epoch = {},
                                    std::optional<ClassifierWeights> init = std::nullopt);

}  // namespace ia2u::classifier
