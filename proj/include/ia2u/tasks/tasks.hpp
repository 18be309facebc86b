#pragma once

#include "ia2u/core/config.hpp"
#include "ia2u/fen/fen.hpp"
#include "ia2u/tasks/detection.hpp"
#include "ia2u/tasks/metrics.hpp"
#include "ia2u/tasks/report.hpp"
#include "ia2u/watersim/corpus.hpp"

#include <torch/torch.h>

#include <functional>
#include <optional>
#include <vector>

namespace ia2u::tasks {

/// Stand-in "in-air" enhancement model: two 3x3 convolutions (3 -> 16 -> 3)
/// with a residual connection, clamped to the image range.
class UIEHeadImpl : public torch::nn::Module {
public:
    UIEHeadImpl();
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr};
    torch::nn::Conv2d conv2_{nullptr};
};
TORCH_MODULE(UIEHead);

/// Defaults per training task. Optimizer settings follow the published
/// recipe; learning-rate peaks and epoch counts are scaled to desk budgets.
RunConfig classifier_defaults();
RunConfig uie_defaults();
RunConfig det_defaults();

/// Image side used at `epoch` under cfg.progressive_sizes (`native` before the first stage).
int progressive_size(const RunConfig& cfg, int epoch, int native);

/// Area-downsamples or bilinearly upsamples a (batch, C, H, W) batch to size x size.
torch::Tensor resize_images(const torch::Tensor& x, int size);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    std::vector<double> val_metrics;  // same order as the report columns
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TaskTraining {
    /// One row per epoch ("epoch_<k>") of validation metrics.
    MetricReport per_epoch;
    std::vector<double> train_loss;
};

/// Joint AdamW optimization of the optional FEN plus the head under uie_loss,
/// reconstructing clean images from degraded ones. Without a FEN the head is
/// trained alone (the plugin-disabled arm). The per-epoch report has columns
/// {psnr, ssim} on the validation split.
TaskTraining train_uie(std::optional<fen::FENModel> fen, UIEHead head, const watersim::LoadedSplit& train,
                       const watersim::LoadedSplit& val, const RunConfig& cfg, const EpochCallback& on_epoch = {});

/// Per-image PSNR and SSIM of head(fen(degraded)) against clean.
MetricReport evaluate_uie(std::optional<fen::FENModel> fen, UIEHead head, const watersim::LoadedSplit& split);

/// Boxes of every record of the split, in order.
std::vector<std::vector<watersim::Box>> split_boxes(const watersim::LoadedSplit& split);

/// Joint momentum-SGD optimization of the optional FEN plus the detector
/// under detection_loss. The per-epoch report has the single column
/// {map50}, the dataset-level mAP50 on the validation split.
TaskTraining train_det(std::optional<fen::FENModel> fen, DetHead head, const watersim::LoadedSplit& train,
                       const watersim::LoadedSplit& val, const RunConfig& cfg, const EpochCallback& on_epoch = {});

struct DetEvaluation {
    MetricReport per_image;  // column {map50}, each image scored on its own
    double dataset_map50 = 0.0;
};

DetEvaluation evaluate_det(std::optional<fen::FENModel> fen, DetHead head, const watersim::LoadedSplit& split);

}  // namespace ia2u::tasks
