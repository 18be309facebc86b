#include "ia2u/priorgen/priorgen.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/ops.hpp"
#include "ia2u/watersim/watersim.hpp"

#include <sstream>

namespace ia2u::priorgen {
namespace {

namespace nn = torch::nn;

std::string shape_of(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

}  // namespace

FeatureMap water_prior(const torch::Tensor& prob, const torch::Tensor& embedding, TargetShape target) {
    if (prob.dim() != 2 || prob.size(1) != watersim::kNumWaterTypes) {
        throw ValidationError("water prior expects probabilities shaped (batch, 9), got " + shape_of(prob));
    }
    if (torch::isnan(prob).any().item<bool>()) {
        throw ValidationError("water prior received NaN probabilities");
    }
    if (embedding.dim() != 2 || embedding.size(0) != watersim::kNumWaterTypes) {
        throw ValidationError("water embedding must be a (9, C) table");
    }
    const auto index = prob.detach().argmax(1);
    const auto rows = embedding.index_select(0, index);  // (batch, C)
    const auto map = rows.view({rows.size(0), rows.size(1), 1, 1})
                         .expand({rows.size(0), rows.size(1), target.height, target.width});
    return FeatureMap(map, target.scale);
}

PriorGeneratorImpl::PriorGeneratorImpl(int64_t channels) : channels_(channels) {
    if (channels <= 0) {
        throw ValidationError("prior generator channel count must be positive");
    }
    embedding_ = register_parameter("water_embedding", torch::randn({watersim::kNumWaterTypes, channels}));
    for (size_t i = 0; i < classifier::kNumStages; ++i) {
        project_[i] = register_module("project" + std::to_string(i),
                                      nn::Conv2d(nn::Conv2dOptions(classifier::kStageChannels[i], channels, 1)));
        torch::NoGradGuard no_grad;
        project_[i]->bias.zero_();
    }
    refine_ = register_module("refine", nn::Conv2d(nn::Conv2dOptions(channels, channels, 1)));
    torch::NoGradGuard no_grad;
    refine_->bias.zero_();
}

DegradationStages PriorGeneratorImpl::degradation_stages(const std::vector<FeatureMap>& features,
                                                         TargetShape target) {
    if (features.size() != classifier::kNumStages) {
        throw ValidationError("degradation prior needs exactly 4 classifier stage features");
    }
    const auto& base = features[0];
    for (size_t i = 0; i < classifier::kNumStages; ++i) {
        const auto& f = features[i];
        if (f.scale() != classifier::kStageScale[i]) {
            throw ValidationError("classifier feature " + std::to_string(i) + " has scale " +
                                  std::to_string(f.scale()) + ", expected " +
                                  std::to_string(classifier::kStageScale[i]));
        }
        if (f.channels() != classifier::kStageChannels[i]) {
            throw ValidationError("classifier feature " + std::to_string(i) + " has " +
                                  std::to_string(f.channels()) + " channels");
        }
        const int64_t factor = int64_t{1} << i;
        if (f.height() * factor != base.height() || f.width() * factor != base.width()) {
            throw ValidationError("classifier feature " + std::to_string(i) + " of shape " +
                                  shape_of(f.data()) + " does not align with R_0 " + shape_of(base.data()));
        }
    }
    torch::Tensor sum;
    for (size_t i = 0; i < classifier::kNumStages; ++i) {
        auto projected = resize_bilinear(project_[i]->forward(features[i].data()), base.height(), base.width());
        sum = sum.defined() ? sum + projected : projected;
    }
    DegradationStages out{instance_norm(sum), {}, FeatureMap(torch::zeros({1, 1, 1, 1}), 1)};
    out.pre_relu = refine_->forward(out.fused_norm);
    out.output = FeatureMap(resize_bilinear(torch::relu(out.pre_relu), target.height, target.width), target.scale);
    return out;
}

FeatureMap degradation_prior(PriorGenerator& gen, const std::vector<FeatureMap>& features, TargetShape target) {
    return gen->degradation_stages(features, target).output;
}

FeatureMap fuse_priors(const std::optional<FeatureMap>& p_water, const std::optional<FeatureMap>& p_degrad,
                       const std::optional<FeatureMap>& p_sample, const PriorToggles& toggles) {
    if (!toggles.any()) {
        throw ValidationError("no prior signal: water, degradation and sample priors are all disabled");
    }
    torch::Tensor sum;
    int64_t scale = 0;
    auto add = [&](bool enabled, const std::optional<FeatureMap>& p, const char* name) {
        if (!enabled) {
            return;
        }
        if (!p) {
            throw ValidationError(std::string(name) + " prior is enabled but was not provided");
        }
        if (sum.defined() && (p->data().sizes() != sum.sizes() || p->scale() != scale)) {
            throw ValidationError(std::string(name) + " prior shape " + shape_of(p->data()) +
                                  " differs from " + shape_of(sum));
        }
        sum = sum.defined() ? sum + p->data() : p->data();
        scale = p->scale();
    };
    add(toggles.water, p_water, "water");
    add(toggles.degrad, p_degrad, "degradation");
    add(toggles.sample, p_sample, "sample");
    return FeatureMap(instance_norm(sum), scale);
}

ImagePriors image_priors(PriorGenerator& gen, const classifier::WaterTypePrediction& pred, TargetShape target,
                         const PriorToggles& toggles) {
    ImagePriors priors;
    if (toggles.water) {
        priors.water = water_prior(pred.prob, gen->embedding(), target);
    }
    if (toggles.degrad) {
        priors.degrad = degradation_prior(gen, pred.features, target);
    }
    return priors;
}

PriorBundle block_priors(const ImagePriors& image, const FeatureMap& f_j, const PriorToggles& toggles) {
    const auto zeros = [&] { return FeatureMap(torch::zeros_like(f_j.data()), f_j.scale()); };
    const std::optional<FeatureMap> sample = toggles.sample ? std::optional<FeatureMap>(sample_prior(f_j)) : std::nullopt;
    auto fused = fuse_priors(image.water, image.degrad, sample, toggles);
    return PriorBundle{toggles.water && image.water ? *image.water : zeros(),
                       toggles.degrad && image.degrad ? *image.degrad : zeros(),
                       sample ? *sample : zeros(), std::move(fused)};
}

}  // namespace ia2u::priorgen
