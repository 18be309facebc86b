#pragma once

#include "ia2u/watersim/watersim.hpp"

#include <torch/torch.h>

#include <vector>

namespace ia2u::tasks {

/// Cell size of the detector's output grid in pixels.
inline constexpr int64_t kDetStride = 8;
/// Prediction channels per cell: objectness, 3 class logits, 4 box values.
inline constexpr int64_t kDetOutputs = 1 + watersim::kNumObjectClasses + 4;

/// Single-scale center-based dense detector: three stride-2 conv stages, a
/// 3x3 conv at stride 8 (each followed by GroupNorm and ReLU) and a 1x1
/// prediction layer. Box channels hold the logits of (center offset x,
/// center offset y) within the cell and (width, height) as fractions of
/// the image side.
class DetHeadImpl : public torch::nn::Module {
public:
    DetHeadImpl();

    /// (batch, 3, H, W) -> (batch, 8, H/8, W/8).
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Sequential backbone_{nullptr};
    torch::nn::Conv2d predict_{nullptr};
};
TORCH_MODULE(DetHead);

/// Dense training targets on the stride-8 grid.
struct DetTargets {
    torch::Tensor objectness;  // (batch, gh, gw) float {0, 1}
    torch::Tensor classes;     // (batch, gh, gw) int64
    torch::Tensor boxes;       // (batch, 4, gh, gw) float in [0, 1]
};

/// Each box is assigned to the cell containing its center; when two centers
/// share a cell the larger box wins.
DetTargets build_targets(const std::vector<std::vector<watersim::Box>>& boxes, int64_t image_h, int64_t image_w);

/// BCE on objectness over all cells, plus cross-entropy on class and L1 on
/// the sigmoid box values at positive cells (those terms vanish without
/// positives). Throws ValidationError on an empty batch or shape mismatch.
torch::Tensor detection_loss(const torch::Tensor& preds, const DetTargets& targets);

struct Detection {
    int cls = 0;
    float score = 0;
    float x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

double iou(const Detection& a, const watersim::Box& b);
double iou(const Detection& a, const Detection& b);

/// Decodes one image's grid to boxes clamped to the image (x0 < x1, y0 < y1),
/// keeps scores >= min_score and applies greedy per-class NMS at IoU 0.5.
std::vector<std::vector<Detection>> decode_detections(const torch::Tensor& preds, int64_t image_h, int64_t image_w,
                                                      float min_score = 0.01f, double nms_iou = 0.5);

/// Greedy suppression in descending score order within each class.
std::vector<Detection> greedy_nms(std::vector<Detection> dets, double iou_threshold);

/// Average precision at IoU >= 0.5 (all-point interpolation) averaged over the
/// three classes. A class with no ground truth scores 1.0 when it also has no
/// predictions and 0.0 otherwise. Indexing is per image.
double map50(const std::vector<std::vector<Detection>>& preds, const std::vector<std::vector<watersim::Box>>& gt);

}  // namespace ia2u::tasks
