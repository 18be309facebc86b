#include "ia2u/tasks/detection.hpp"

#include "ia2u/core/error.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace ia2u::tasks {
namespace {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

constexpr double kObjectnessPrior = -2.0;
constexpr int64_t kDetGroups = 8;

double area(double x0, double y0, double x1, double y1) {
    return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
}

double iou_coords(double ax0, double ay0, double ax1, double ay1, double bx0, double by0, double bx1, double by1) {
    const double inter = area(std::max(ax0, bx0), std::max(ay0, by0), std::min(ax1, bx1), std::min(ay1, by1));
    const double uni = area(ax0, ay0, ax1, ay1) + area(bx0, by0, bx1, by1) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace

DetHeadImpl::DetHeadImpl() {
    backbone_ = register_module("backbone", nn::Sequential());
    const std::array<std::array<int64_t, 3>, 4> stages = {{{3, 16, 2}, {16, 32, 2}, {32, 64, 2}, {64, 64, 1}}};
    for (const auto& [in, out, stride] : stages) {
        backbone_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
        // Without normalization momentum SGD stalls on the low-contrast inputs.
        backbone_->push_back(nn::GroupNorm(nn::GroupNormOptions(kDetGroups, out)));
        backbone_->push_back(nn::ReLU());
    }
    predict_ = register_module("predict", nn::Conv2d(nn::Conv2dOptions(64, kDetOutputs, 1)));
    torch::NoGradGuard no_grad;
    predict_->bias.zero_();
    predict_->bias[0].fill_(kObjectnessPrior);
}

torch::Tensor DetHeadImpl::forward(const torch::Tensor& x) {
    return predict_->forward(backbone_->forward(x));
}

DetTargets build_targets(const std::vector<std::vector<watersim::Box>>& boxes, int64_t image_h, int64_t image_w) {
    if (image_h % kDetStride != 0 || image_w % kDetStride != 0) {
        throw ValidationError("detector input sides must be divisible by 8");
    }
    const auto batch = static_cast<int64_t>(boxes.size());
    const int64_t gh = image_h / kDetStride;
    const int64_t gw = image_w / kDetStride;
    DetTargets t{torch::zeros({batch, gh, gw}), torch::zeros({batch, gh, gw}, torch::kInt64),
                 torch::zeros({batch, 4, gh, gw})};
    auto obj = t.objectness.accessor<float, 3>();
    auto cls = t.classes.accessor<int64_t, 3>();
    auto box = t.boxes.accessor<float, 4>();
    std::vector<double> best_area(static_cast<size_t>(gh * gw));
    for (int64_t b = 0; b < batch; ++b) {
        std::fill(best_area.begin(), best_area.end(), -1.0);
        for (const auto& gt : boxes[static_cast<size_t>(b)]) {
            const double cx = 0.5 * (gt.x0 + gt.x1);
            const double cy = 0.5 * (gt.y0 + gt.y1);
            const auto gx = std::clamp<int64_t>(static_cast<int64_t>(cx / kDetStride), 0, gw - 1);
            const auto gy = std::clamp<int64_t>(static_cast<int64_t>(cy / kDetStride), 0, gh - 1);
            const double a = area(gt.x0, gt.y0, gt.x1, gt.y1);
            auto& best = best_area[static_cast<size_t>(gy * gw + gx)];
            if (a <= best) {
                continue;
            }
            best = a;
            obj[b][gy][gx] = 1.0f;
            cls[b][gy][gx] = gt.cls;
            box[b][0][gy][gx] = static_cast<float>(cx / kDetStride - static_cast<double>(gx));
            box[b][1][gy][gx] = static_cast<float>(cy / kDetStride - static_cast<double>(gy));
            box[b][2][gy][gx] = static_cast<float>((gt.x1 - gt.x0) / image_w);
            box[b][3][gy][gx] = static_cast<float>((gt.y1 - gt.y0) / image_h);
        }
    }
    return t;
}

torch::Tensor detection_loss(const torch::Tensor& preds, const DetTargets& targets) {
    if (preds.dim() != 4 || preds.size(0) == 0) {
        throw ValidationError("detection loss needs a non-empty (batch, 8, gh, gw) prediction tensor");
    }
    if (preds.size(1) != kDetOutputs || preds.size(0) != targets.objectness.size(0) ||
        preds.size(2) != targets.objectness.size(1) || preds.size(3) != targets.objectness.size(2)) {
        throw ValidationError("detection predictions do not match the target grid");
    }
    const auto dtype = preds.scalar_type();
    const auto obj_target = targets.objectness.to(dtype);
    auto loss = F::binary_cross_entropy_with_logits(preds.select(1, 0), obj_target);

    const auto positive = targets.objectness > 0.5;  // (batch, gh, gw)
    const int64_t n_pos = positive.sum().item<int64_t>();
    if (n_pos == 0) {
        return loss;
    }
    // (batch, gh, gw, 8) rows at positive cells.
    const auto cells = preds.permute({0, 2, 3, 1}).index({positive});
    const auto cls_logits = cells.slice(1, 1, 1 + watersim::kNumObjectClasses);
    const auto box_pred = torch::sigmoid(cells.slice(1, 1 + watersim::kNumObjectClasses, kDetOutputs));
    const auto cls_target = targets.classes.index({positive});
    const auto box_target = targets.boxes.permute({0, 2, 3, 1}).index({positive}).to(dtype);
    loss = loss + F::cross_entropy(cls_logits, cls_target);
    loss = loss + (box_pred - box_target).abs().mean();
    return loss;
}

double iou(const Detection& a, const watersim::Box& b) {
    return iou_coords(a.x0, a.y0, a.x1, a.y1, b.x0, b.y0, b.x1, b.y1);
}

double iou(const Detection& a, const Detection& b) {
    return iou_coords(a.x0, a.y0, a.x1, a.y1, b.x0, b.y0, b.x1, b.y1);
}

std::vector<Detection> greedy_nms(std::vector<Detection> dets, double iou_threshold) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.cls == d.cls && iou(k, d) > iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(d);
        }
    }
    return kept;
}

std::vector<std::vector<Detection>> decode_detections(const torch::Tensor& preds, int64_t image_h, int64_t image_w,
                                                      float min_score, double nms_iou) {
    torch::NoGradGuard no_grad;
    const auto p = preds.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    const auto obj = torch::sigmoid(p.select(1, 0));
    const auto cls_prob = torch::softmax(p.slice(1, 1, 1 + watersim::kNumObjectClasses), 1);
    const auto [cls_score, cls_idx] = cls_prob.max(1);
    const auto score = (obj * cls_score).contiguous();
    const auto box = torch::sigmoid(p.slice(1, 1 + watersim::kNumObjectClasses, kDetOutputs)).contiguous();
    const auto s = score.accessor<float, 3>();
    const auto c = cls_idx.accessor<int64_t, 3>();
    const auto bx = box.accessor<float, 4>();
    std::vector<std::vector<Detection>> out(static_cast<size_t>(p.size(0)));
    const auto w = static_cast<float>(image_w);
    const auto h = static_cast<float>(image_h);
    for (int64_t b = 0; b < p.size(0); ++b) {
        std::vector<Detection> dets;
        for (int64_t gy = 0; gy < p.size(2); ++gy) {
            for (int64_t gx = 0; gx < p.size(3); ++gx) {
                if (s[b][gy][gx] < min_score) {
                    continue;
                }
                const float cx = (static_cast<float>(gx) + bx[b][0][gy][gx]) * kDetStride;
                const float cy = (static_cast<float>(gy) + bx[b][1][gy][gx]) * kDetStride;
                const float half_w = 0.5f * bx[b][2][gy][gx] * w;
                const float half_h = 0.5f * bx[b][3][gy][gx] * h;
                Detection d{static_cast<int>(c[b][gy][gx]), s[b][gy][gx], std::clamp(cx - half_w, 0.0f, w),
                            std::clamp(cy - half_h, 0.0f, h), std::clamp(cx + half_w, 0.0f, w),
                            std::clamp(cy + half_h, 0.0f, h)};
                // Keep at least one pixel of extent inside the image.
                if (d.x1 - d.x0 < 1.0f) {
                    d.x0 = std::min(d.x0, w - 1.0f);
                    d.x1 = d.x0 + 1.0f;
                }
                if (d.y1 - d.y0 < 1.0f) {
                    d.y0 = std::min(d.y0, h - 1.0f);
                    d.y1 = d.y0 + 1.0f;
                }
                dets.push_back(d);
            }
        }
        out[static_cast<size_t>(b)] = greedy_nms(std::move(dets), nms_iou);
    }
    return out;
}

double map50(const std::vector<std::vector<Detection>>& preds, const std::vector<std::vector<watersim::Box>>& gt) {
    if (preds.size() != gt.size()) {
        throw ValidationError("map50: prediction and ground-truth image counts differ");
    }
    double total = 0.0;
    for (int cls = 0; cls < watersim::kNumObjectClasses; ++cls) {
        struct Scored {
            float score;
            size_t image;
            const Detection* det;
        };
        std::vector<Scored> ranked;
        std::vector<std::vector<bool>> used(gt.size());
        size_t n_gt = 0;
        for (size_t i = 0; i < gt.size(); ++i) {
            used[i].assign(gt[i].size(), false);
            n_gt += static_cast<size_t>(std::count_if(gt[i].begin(), gt[i].end(),
                                                      [&](const watersim::Box& b) { return b.cls == cls; }));
            for (const auto& d : preds[i]) {
                if (d.cls == cls) {
                    ranked.push_back({d.score, i, &d});
                }
            }
        }
        if (n_gt == 0) {
            total += ranked.empty() ? 1.0 : 0.0;
            continue;
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
        std::vector<double> precision;
        std::vector<double> recall;
        size_t tp = 0;
        for (size_t k = 0; k < ranked.size(); ++k) {
            const auto& r = ranked[k];
            double best = 0.0;
            std::ptrdiff_t match = -1;
            const auto& boxes = gt[r.image];
            for (size_t g = 0; g < boxes.size(); ++g) {
                if (boxes[g].cls != cls || used[r.image][g]) {
                    continue;
                }
                const double o = iou(*r.det, boxes[g]);
                if (o >= 0.5 && o > best) {
                    best = o;
                    match = static_cast<std::ptrdiff_t>(g);
                }
            }
            if (match >= 0) {
                used[r.image][static_cast<size_t>(match)] = true;
                ++tp;
            }
            precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
            recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
        }
        // All-point interpolation: area under the monotone precision envelope.
        for (size_t k = precision.size(); k-- > 1;) {
            precision[k - 1] = std::max(precision[k - 1], precision[k]);
        }
        double ap = 0.0;
        double prev_recall = 0.0;
        for (size_t k = 0; k < precision.size(); ++k) {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
        total += ap;
    }
    return total / watersim::kNumObjectClasses;
}

}  // namespace ia2u::tasks
