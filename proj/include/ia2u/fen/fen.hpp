#pragma once

#include "ia2u/classifier/classifier.hpp"
#include "ia2u/core/config.hpp"
#include "ia2u/core/tensor_types.hpp"
#include "ia2u/msfa/msfa.hpp"
#include "ia2u/priorgen/priorgen.hpp"

#include <torch/torch.h>

#include <functional>
#include <vector>

namespace ia2u::fen {

priorgen::PriorToggles toggles_from(const RunConfig& cfg);

/// Feature enhancement network: 3x3 stem to C channels, a stack of MSFA
/// blocks each queried by its own prior bundle, and a zero-initialized 3x3
/// head whose output is added to the input image. The frozen classifier is
/// a registered submodule so FEN checkpoints are self-contained, but its
/// parameters never require gradients.
class FENModelImpl : public torch::nn::Module {
public:
    /// Throws ValidationError when every prior is disabled and
    /// std::logic_error when the classifier is not frozen.
    FENModelImpl(const RunConfig& cfg, classifier::ClassifierWeights frozen_classifier);

    struct Output {
        torch::Tensor image;     // clamp(x + head(F_L))
        torch::Tensor features;  // F_L
    };

    /// Raw forward on a (batch, 3, H, W) tensor; validation is done by enhance().
    Output forward(const torch::Tensor& x);

    /// Every parameter except the classifier's.
    std::vector<torch::Tensor> trainable_parameters() const;

    const RunConfig& config() const { return cfg_; }
    const classifier::ClassifierWeights& classifier() const { return classifier_; }
    priorgen::PriorGenerator& prior_generator() { return priors_; }
    std::vector<msfa::MSFABlock>& blocks() { return blocks_; }
    torch::nn::Conv2d& stem() { return stem_; }
    torch::nn::Conv2d& head() { return head_; }

private:
    RunConfig cfg_;
    priorgen::PriorToggles toggles_;
    classifier::ClassifierWeights classifier_;
    torch::nn::Conv2d stem_{nullptr};
    std::vector<msfa::MSFABlock> blocks_;
    priorgen::PriorGenerator priors_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(FENModel);

/// y = clamp(x + head(F_L)). Throws ValidationError unless H and W are divisible by 32.
ImageTensor enhance(const ImageTensor& x, FENModel& m);

/// F_L, the pre-head features at full resolution.
FeatureMap enhance_features(const ImageTensor& x, FENModel& m);

using TaskNet = std::function<torch::Tensor(const torch::Tensor&)>;

/// A task network preceded by the enhancement plugin.
class PluggedModel {
public:
    PluggedModel(FENModel fen, TaskNet task) : fen_(std::move(fen)), task_(std::move(task)) {}

    torch::Tensor operator()(const ImageTensor& x) { return task_(enhance(x, fen_).data()); }

    FENModel& fen() { return fen_; }

private:
    FENModel fen_;
    TaskNet task_;
};

/// composed(x) = task_net(enhance(x, m)).
PluggedModel plug(FENModel m, TaskNet task_net);

}  // namespace ia2u::fen
