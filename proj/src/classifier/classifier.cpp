#include "ia2u/classifier/classifier.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/rng.hpp"
#include "ia2u/core/training.hpp"
#include "ia2u/watersim/watersim.hpp"

#include <stdexcept>

namespace ia2u::classifier {
namespace {

namespace nn = torch::nn;

// conv3x3(stride) -> IN -> ReLU -> conv3x3 -> IN -> ReLU, appended to `seq`.
void append_conv_block(nn::Sequential& seq, int64_t in, int64_t out, int64_t stride) {
    seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
    seq->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
    seq->push_back(nn::ReLU());
    seq->push_back(nn::Conv2d(nn::Conv2dOptions(out, out, 3).stride(1).padding(1)));
    seq->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
    seq->push_back(nn::ReLU());
}

constexpr int64_t kEvalBatch = 64;

}  // namespace

WaterClassifierImpl::WaterClassifierImpl() {
    nn::Sequential stem(nn::Conv2d(nn::Conv2dOptions(3, kStageChannels[0], 3).stride(2).padding(1)),
                        nn::InstanceNorm2d(nn::InstanceNorm2dOptions(kStageChannels[0]).affine(true)), nn::ReLU());
    append_conv_block(stem, kStageChannels[0], kStageChannels[0], 2);
    stem_ = register_module("stem", stem);
    for (size_t i = 0; i + 1 < kNumStages; ++i) {
        nn::Sequential stage;
        append_conv_block(stage, kStageChannels[i], kStageChannels[i + 1], 2);
        stages_[i] = register_module("stage" + std::to_string(i + 1), stage);
    }
    colour_ = register_module("colour", nn::Linear(kColourStats, kColourEmbed));
    head_ = register_module("head", nn::Linear(kStageChannels.back() + kColourEmbed, watersim::kNumWaterTypes));
}

WaterClassifierImpl::Output WaterClassifierImpl::forward(const torch::Tensor& x) {
    Output out;
    out.stages[0] = stem_->forward(x);
    for (size_t i = 0; i + 1 < kNumStages; ++i) {
        out.stages[i + 1] = stages_[i]->forward(out.stages[i]);
    }
    const auto stats = torch::cat({x.mean({2, 3}), x.std({2, 3}, /*unbiased=*/false)}, 1);
    const auto colour = torch::relu(colour_->forward(stats));
    out.logits = head_->forward(torch::cat({out.stages.back().mean({2, 3}), colour}, 1));
    return out;
}

ClassifierWeights::ClassifierWeights() : net_(WaterClassifier()) {}

ClassifierWeights::ClassifierWeights(WaterClassifier net, bool frozen) : net_(std::move(net)), frozen_(frozen) {
    if (frozen_) {
        for (auto& p : net_->parameters()) {
            p.set_requires_grad(false);
        }
    }
}

torch::Tensor logits_to_prob(const torch::Tensor& logits) {
    return torch::softmax(logits, -1);
}

WaterTypePrediction classify(const ImageTensor& x, const ClassifierWeights& w) {
    if (x.height() % 32 != 0 || x.width() % 32 != 0) {
        throw ValidationError("classifier input height and width must be divisible by 32, got " +
                              std::to_string(x.height()) + "x" + std::to_string(x.width()));
    }
    std::optional<torch::NoGradGuard> no_grad;
    if (w.frozen()) {
        no_grad.emplace();
    }
    auto& net = const_cast<WaterClassifier&>(w.net());
    auto input = x.data();
    if (w.frozen()) {
        input = input.detach();
    }
    const auto param_type = net->parameters().front().scalar_type();
    auto out = net->forward(input.to(param_type));
    WaterTypePrediction pred;
    pred.logits = out.logits;
    pred.prob = logits_to_prob(out.logits);
    for (size_t i = 0; i < kNumStages; ++i) {
        pred.features.emplace_back(out.stages[i], kStageScale[i]);
        pred.features.back().check_matches_input(x.height(), x.width());
    }
    return pred;
}

ClassifierWeights freeze(ClassifierWeights w) {
    w.net()->eval();
    return ClassifierWeights(w.net(), /*frozen=*/true);
}

double top1_accuracy(const ClassifierWeights& w, const torch::Tensor& images, const torch::Tensor& labels) {
    torch::NoGradGuard no_grad;
    auto& net = const_cast<WaterClassifier&>(w.net());
    const int64_t n = images.size(0);
    int64_t correct = 0;
    for (int64_t begin = 0; begin < n; begin += kEvalBatch) {
        const int64_t end = std::min(n, begin + kEvalBatch);
        auto logits = net->forward(images.slice(0, begin, end)).logits;
        correct += logits.argmax(1).eq(labels.slice(0, begin, end)).sum().item<int64_t>();
    }
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

ClassifierTraining train_classifier(const watersim::LoadedSplit& train, const watersim::LoadedSplit& val,
                                    const RunConfig& cfg,
                                    const std::function<void(const ClassifierEpoch&)>& on_epoch,
                                    std::optional<ClassifierWeights> init) {
    cfg.validate();
    if (train.size() == 0) {
        throw ValidationError("cannot train the classifier on an empty corpus");
    }
    if (!init) {
        seed_parameters(cfg.seed);
        init.emplace();
    }
    if (init->frozen()) {
        throw std::logic_error("cannot train frozen classifier weights");
    }
    ClassifierTraining result{*init, {}, {}};
    auto& net = result.weights.net();
    net->train();

    const int steps_per_epoch = batches_per_epoch(train.size(), cfg.batch_size);
    const RunConfig sched = with_schedule(cfg, steps_per_epoch);
    torch::optim::AdamW opt(net->parameters(), torch::optim::AdamWOptions(sched.min_lr)
                                                    .betas({sched.beta1, sched.beta2})
                                                    .weight_decay(sched.weight_decay));
    int step = 0;
    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        const auto order = epoch_permutation(train.size(), sched.seed, epoch);
        double loss_sum = 0.0;
        int batches = 0;
        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(sched.batch_size)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(sched.batch_size));
            const auto x = gather_rows(train.degraded, order, begin, end);
            const auto y = gather_rows(train.water_types, order, begin, end);
            set_learning_rate(opt, cosine_warmup_lr(std::min(step, sched.total_steps), sched));
            opt.zero_grad();
            auto loss = torch::nn::functional::cross_entropy(net->forward(x).logits, y);
            loss.backward();
            opt.step();
            const double l = loss.item<double>();
            result.step_losses.push_back(l);
            loss_sum += l;
            ++batches;
            ++step;
        }
        ClassifierEpoch log{epoch, loss_sum / batches,
                            val.size() > 0 ? top1_accuracy(result.weights, val.degraded, val.water_types) : 0.0};
        result.epochs.push_back(log);
        if (on_epoch) {
            on_epoch(log);
        }
    }
    net->eval();
    return result;
}

}  // namespace ia2u::classifier
