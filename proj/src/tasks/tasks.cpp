#include "ia2u/tasks/tasks.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/training.hpp"

namespace ia2u::tasks {
namespace {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

constexpr int64_t kEvalBatch = 16;

torch::Tensor enhance_batch(std::optional<fen::FENModel>& fen, const torch::Tensor& x) {
    return fen ? (*fen)->forward(x).image : x;
}

// Group 0 is the task head, group 1 (when present) the plugin.
struct JointParameters {
    std::vector<torch::optim::OptimizerParamGroup> groups;
    std::vector<double> lr_scales;
};

JointParameters joint_parameters(std::optional<fen::FENModel>& fen, nn::Module& head, const RunConfig& cfg) {
    JointParameters p;
    p.groups.emplace_back(head.parameters());
    p.lr_scales.push_back(1.0);
    if (fen) {
        p.groups.emplace_back((*fen)->trainable_parameters());
        p.lr_scales.push_back(cfg.plugin_lr_scale);
    }
    return p;
}

void set_mode(std::optional<fen::FENModel>& fen, nn::Module& head, bool train) {
    head.train(train);
    if (fen) {
        (*fen)->train(train);
        // The frozen classifier always runs in evaluation mode.
        const_cast<classifier::WaterClassifier&>((*fen)->classifier().net())->eval();
    }
}

template <typename StepFn>
double run_epoch(const watersim::LoadedSplit& train, const RunConfig& sched, int epoch, int& step,
                 torch::optim::Optimizer& opt, const std::vector<double>& lr_scales, StepFn&& loss_of) {
    const auto order = epoch_permutation(train.size(), sched.seed, epoch);
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(sched.batch_size)) {
        const size_t end = std::min(order.size(), begin + static_cast<size_t>(sched.batch_size));
        std::vector<int64_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
        set_learning_rate(opt, cosine_warmup_lr(std::min(step, sched.total_steps), sched), lr_scales);
        opt.zero_grad();
        auto loss = loss_of(idx);
        loss.backward();
        opt.step();
        loss_sum += loss.template item<double>();
        ++batches;
        ++step;
    }
    return loss_sum / batches;
}

}  // namespace

UIEHeadImpl::UIEHeadImpl() {
    conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(3, 16, 3).padding(1)));
    conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(16, 3, 3).padding(1)));
}

torch::Tensor UIEHeadImpl::forward(const torch::Tensor& x) {
    return torch::clamp(x + conv2_->forward(torch::relu(conv1_->forward(x))), 0.0, 1.0);
}

RunConfig classifier_defaults() {
    RunConfig cfg;
    cfg.min_lr = 1e-9;
    cfg.max_lr = 2.4e-3;
    cfg.weight_decay = 0.05;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    return cfg;
}

RunConfig uie_defaults() {
    RunConfig cfg;
    cfg.min_lr = 1e-6;
    cfg.max_lr = 2e-3;
    cfg.weight_decay = 0.05;
    cfg.epochs = 15;
    cfg.batch_size = 8;
    return cfg;
}

RunConfig det_defaults() {
    RunConfig cfg;
    cfg.min_lr = 1e-3;
    cfg.max_lr = 2e-2;
    cfg.weight_decay = 1e-4;
    cfg.momentum = 0.9;
    // The plugin diverges from its identity start at the head's SGD rate.
    cfg.plugin_lr_scale = 0.1;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    return cfg;
}

int progressive_size(const RunConfig& cfg, int epoch, int native) {
    int size = native;
    for (const auto& stage : cfg.progressive_sizes) {
        if (stage.epoch <= epoch) {
            size = stage.image_size;
        }
    }
    return size;
}

torch::Tensor resize_images(const torch::Tensor& x, int size) {
    if (x.size(2) == size && x.size(3) == size) {
        return x;
    }
    auto opts = F::InterpolateFuncOptions().size(std::vector<int64_t>{size, size});
    if (size < x.size(2)) {
        opts.mode(torch::kArea);
    } else {
        opts.mode(torch::kBilinear).align_corners(false);
    }
    return F::interpolate(x, opts);
}

TaskTraining train_uie(std::optional<fen::FENModel> fen, UIEHead head, const watersim::LoadedSplit& train,
                       const watersim::LoadedSplit& val, const RunConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train.size() == 0) {
        throw ValidationError("cannot train on an empty split");
    }
    const RunConfig sched = with_schedule(cfg, batches_per_epoch(train.size(), cfg.batch_size));
    auto params = joint_parameters(fen, *head, sched);
    torch::optim::AdamW opt(params.groups, torch::optim::AdamWOptions(sched.min_lr)
                                               .betas({sched.beta1, sched.beta2})
                                               .weight_decay(sched.weight_decay));
    const int native = static_cast<int>(train.degraded.size(2));
    TaskTraining result;
    result.per_epoch.columns = {"psnr", "ssim"};
    int step = 0;
    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        set_mode(fen, *head, true);
        const int size = progressive_size(sched, epoch, native);
        const double loss = run_epoch(train, sched, epoch, step, opt, params.lr_scales, [&](const std::vector<int64_t>& idx) {
            const auto x = resize_images(gather_rows(train.degraded, idx, 0, idx.size()), size);
            const auto ref = resize_images(gather_rows(train.clean, idx, 0, idx.size()), size);
            return uie_loss(head->forward(enhance_batch(fen, x)), ref, sched);
        });
        set_mode(fen, *head, false);
        const auto eval = evaluate_uie(fen, head, val);
        EpochLog log{epoch, loss, eval.mean()};
        result.train_loss.push_back(loss);
        result.per_epoch.add("epoch_" + std::to_string(epoch), log.val_metrics);
        if (on_epoch) {
            on_epoch(log);
        }
    }
    set_mode(fen, *head, false);
    return result;
}

MetricReport evaluate_uie(std::optional<fen::FENModel> fen, UIEHead head, const watersim::LoadedSplit& split) {
    torch::NoGradGuard no_grad;
    MetricReport report;
    report.columns = {"psnr", "ssim"};
    for (int64_t begin = 0; begin < split.size(); begin += kEvalBatch) {
        const int64_t end = std::min(split.size(), begin + kEvalBatch);
        const auto pred = head->forward(enhance_batch(fen, split.degraded.slice(0, begin, end)));
        const auto ref = split.clean.slice(0, begin, end);
        const auto p = psnr_per_image(pred, ref);
        const auto s = ssim_per_image(pred, ref);
        for (int64_t i = 0; i < end - begin; ++i) {
            report.add(split.records[static_cast<size_t>(begin + i)].id,
                       {p[i].item<double>(), s[i].item<double>()});
        }
    }
    return report;
}

std::vector<std::vector<watersim::Box>> split_boxes(const watersim::LoadedSplit& split) {
    std::vector<std::vector<watersim::Box>> out;
    for (const auto& r : split.records) {
        out.push_back(r.boxes);
    }
    return out;
}

TaskTraining train_det(std::optional<fen::FENModel> fen, DetHead head, const watersim::LoadedSplit& train,
                       const watersim::LoadedSplit& val, const RunConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train.size() == 0) {
        throw ValidationError("cannot train on an empty split");
    }
    const RunConfig sched = with_schedule(cfg, batches_per_epoch(train.size(), cfg.batch_size));
    auto params = joint_parameters(fen, *head, sched);
    torch::optim::SGD opt(params.groups,
                          torch::optim::SGDOptions(sched.min_lr).momentum(sched.momentum).weight_decay(sched.weight_decay));
    const auto boxes = split_boxes(train);
    const auto targets = build_targets(boxes, train.degraded.size(2), train.degraded.size(3));
    TaskTraining result;
    result.per_epoch.columns = {"map50"};
    int step = 0;
    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        set_mode(fen, *head, true);
        const double loss = run_epoch(train, sched, epoch, step, opt, params.lr_scales, [&](const std::vector<int64_t>& idx) {
            const auto x = gather_rows(train.degraded, idx, 0, idx.size());
            const DetTargets t{gather_rows(targets.objectness, idx, 0, idx.size()),
                               gather_rows(targets.classes, idx, 0, idx.size()),
                               gather_rows(targets.boxes, idx, 0, idx.size())};
            return detection_loss(head->forward(enhance_batch(fen, x)), t);
        });
        set_mode(fen, *head, false);
        EpochLog log{epoch, loss, {evaluate_det(fen, head, val).dataset_map50}};
        result.train_loss.push_back(loss);
        result.per_epoch.add("epoch_" + std::to_string(epoch), log.val_metrics);
        if (on_epoch) {
            on_epoch(log);
        }
    }
    set_mode(fen, *head, false);
    return result;
}

DetEvaluation evaluate_det(std::optional<fen::FENModel> fen, DetHead head, const watersim::LoadedSplit& split) {
    torch::NoGradGuard no_grad;
    std::vector<std::vector<Detection>> preds;
    for (int64_t begin = 0; begin < split.size(); begin += kEvalBatch) {
        const int64_t end = std::min(split.size(), begin + kEvalBatch);
        const auto x = split.degraded.slice(0, begin, end);
        auto dets = decode_detections(head->forward(enhance_batch(fen, x)), x.size(2), x.size(3));
        preds.insert(preds.end(), std::make_move_iterator(dets.begin()), std::make_move_iterator(dets.end()));
    }
    const auto gt = split_boxes(split);
    DetEvaluation eval;
    eval.per_image.columns = {"map50"};
    for (size_t i = 0; i < gt.size(); ++i) {
        eval.per_image.add(split.records[i].id, {map50({preds[i]}, {gt[i]})});
    }
    eval.dataset_map50 = map50(preds, gt);
    return eval;
}

}  // namespace ia2u::tasks
