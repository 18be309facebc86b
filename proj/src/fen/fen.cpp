#include "ia2u/fen/fen.hpp"

#include "ia2u/core/error.hpp"

#include <stdexcept>

namespace ia2u::fen {
namespace {

namespace nn = torch::nn;

}  // namespace

priorgen::PriorToggles toggles_from(const RunConfig& cfg) {
    return {cfg.enable_water_prior, cfg.enable_degrad_prior, cfg.enable_sample_prior};
}

FENModelImpl::FENModelImpl(const RunConfig& cfg, classifier::ClassifierWeights frozen_classifier)
    : cfg_(cfg), toggles_(toggles_from(cfg)), classifier_(std::move(frozen_classifier)) {
    cfg_.validate();
    if (!toggles_.any()) {
        throw ValidationError("no prior signal: water, degradation and sample priors are all disabled");
    }
    if (!classifier_.frozen()) {
        throw std::logic_error("the FEN requires a frozen classifier");
    }
    register_module("classifier", classifier_.net());
    stem_ = register_module("stem", nn::Conv2d(nn::Conv2dOptions(3, cfg_.channels, 3).padding(1)));
    for (int j = 0; j < cfg_.fen_blocks; ++j) {
        blocks_.push_back(register_module("block" + std::to_string(j), msfa::MSFABlock(cfg_)));
    }
    priors_ = register_module("priors", priorgen::PriorGenerator(cfg_.channels));
    head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(cfg_.channels, 3, 3).padding(1)));
    torch::NoGradGuard no_grad;
    stem_->bias.zero_();
    head_->weight.zero_();
    head_->bias.zero_();
}

FENModelImpl::Output FENModelImpl::forward(const torch::Tensor& x) {
    const int64_t h = x.size(2);
    const int64_t w = x.size(3);
    const priorgen::TargetShape target{h, w, 1};
    priorgen::ImagePriors image;
    if (toggles_.water || toggles_.degrad) {
        // One classifier pass per image; its priors are shared by all blocks.
        const auto pred = classifier::classify(ImageTensor(x.detach()), classifier_);
        image = priorgen::image_priors(priors_, pred, target, toggles_);
    }
    auto f = stem_->forward(x);
    for (auto& block : blocks_) {
        const FeatureMap f_j(f, 1);
        const auto bundle = priorgen::block_priors(image, f_j, toggles_);
        f = f + block->forward(f, bundle.fused.data());
    }
    return {torch::clamp(x + head_->forward(f), 0.0, 1.0), f};
}

std::vector<torch::Tensor> FENModelImpl::trainable_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& item : named_parameters(true)) {
        if (item.key().rfind("classifier.", 0) != 0) {
            out.push_back(item.value());
        }
    }
    return out;
}

ImageTensor enhance(const ImageTensor& x, FENModel& m) {
    if (x.height() % 32 != 0 || x.width() % 32 != 0) {
        throw ValidationError("enhance needs image height and width divisible by 32");
    }
    return ImageTensor(m->forward(x.data()).image);
}

FeatureMap enhance_features(const ImageTensor& x, FENModel& m) {
    if (x.height() % 32 != 0 || x.width() % 32 != 0) {
        throw ValidationError("enhance needs image height and width divisible by 32");
    }
    return FeatureMap(m->forward(x.data()).features, 1);
}

PluggedModel plug(FENModel m, TaskNet task_net) {
    return PluggedModel(std::move(m), std::move(task_net));
}

}  // namespace ia2u::fen
