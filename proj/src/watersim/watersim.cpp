#include "ia2u/watersim/watersim.hpp"

#include "ia2u/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace ia2u::watersim {
namespace {

// Beta in 1/m, backlight in [0, 1]. Red attenuation grows by 1.12x per type,
// wider than the (1 + j) / (1 - j) ratio of the jitter band. Green and blue
// attenuate enough that the backlight colour dominates the image mean.
constexpr std::array<WaterPreset, kNumWaterTypes> kPresets = {{
    {"ocean-I", {0.500, 0.600, 0.60}, {0.04, 0.22, 0.62}},
    {"ocean-IA", {0.560, 0.600, 0.68}, {0.06, 0.32, 0.64}},
    {"ocean-IB", {0.627, 0.600, 0.76}, {0.08, 0.44, 0.62}},
    {"ocean-II", {0.702, 0.600, 0.84}, {0.12, 0.54, 0.54}},
    {"ocean-III", {0.787, 0.600, 0.92}, {0.18, 0.60, 0.42}},
    {"coastal-1", {0.881, 0.600, 1.00}, {0.28, 0.62, 0.30}},
    {"coastal-3", {0.987, 0.600, 1.08}, {0.40, 0.60, 0.20}},
    {"coastal-5", {1.105, 0.600, 1.16}, {0.52, 0.56, 0.12}},
    {"coastal-7", {1.238, 0.600, 1.24}, {0.62, 0.50, 0.08}},
}};

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct Canvas {
    int size;
    std::vector<float> data;  // CHW

    explicit Canvas(int s) : size(s), data(static_cast<size_t>(3 * s * s), 0.0f) {}

    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * size + y) * size + x]; }

    void set(int y, int x, const std::array<double, 3>& rgb) {
        for (int c = 0; c < 3; ++c) {
            at(c, y, x) = static_cast<float>(rgb[c]);
        }
    }
};

std::array<double, 3> random_color(Rng& rng, double lo, double hi) {
    return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

void paint_background(Canvas& cv, Rng& rng) {
    const auto a = random_color(rng, 0.25, 0.85);
    const auto b = random_color(rng, 0.25, 0.85);
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    const double half = 0.5 * cv.size;
    for (int y = 0; y < cv.size; ++y) {
        for (int x = 0; x < cv.size; ++x) {
            // Projection onto the gradient axis, mapped to [0, 1].
            const double t = std::clamp(0.5 + ((x + 0.5 - half) * dx + (y + 0.5 - half) * dy) /
                                                  (std::numbers::sqrt2 * cv.size),
                                        0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                cv.at(c, y, x) = static_cast<float>(a[c] * (1.0 - t) + b[c] * t);
            }
        }
    }
}

// Elliptical patch modulated by a sinusoidal grating, blended into the background.
void paint_texture_patch(Canvas& cv, Rng& rng) {
    const double cx = uniform(rng, 0.0, cv.size);
    const double cy = uniform(rng, 0.0, cv.size);
    const double rx = uniform(rng, 0.1, 0.35) * cv.size;
    const double ry = uniform(rng, 0.1, 0.35) * cv.size;
    const auto tint = random_color(rng, 0.2, 0.9);
    const double freq = uniform(rng, 0.25, 0.9);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double orient = uniform(rng, 0.0, std::numbers::pi);
    const double gx = std::cos(orient);
    const double gy = std::sin(orient);
    const double amp = uniform(rng, 0.05, 0.15);
    for (int y = 0; y < cv.size; ++y) {
        for (int x = 0; x < cv.size; ++x) {
            const double ex = (x + 0.5 - cx) / rx;
            const double ey = (y + 0.5 - cy) / ry;
            const double r2 = ex * ex + ey * ey;
            if (r2 >= 1.0) {
                continue;
            }
            const double alpha = 0.7 * (1.0 - r2);
            const double grating = amp * std::sin(freq * ((x + 0.5) * gx + (y + 0.5) * gy) + phase);
            for (int c = 0; c < 3; ++c) {
                const double v = (1.0 - alpha) * cv.at(c, y, x) + alpha * (tint[c] + grating);
                cv.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
}

bool inside_shape(ObjectClass cls, const Box& b, double px, double py) {
    switch (cls) {
        case ObjectClass::Disc: {
            const double cx = 0.5 * (b.x0 + b.x1);
            const double cy = 0.5 * (b.y0 + b.y1);
            const double r = 0.5 * (b.x1 - b.x0);
            return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
        }
        case ObjectClass::Square:
            return px >= b.x0 && px < b.x1 && py >= b.y0 && py < b.y1;
        case ObjectClass::Triangle: {
            // Apex at top centre, base along the bottom edge.
            if (py < b.y0 || py >= b.y1) {
                return false;
            }
            const double t = (py - b.y0) / (b.y1 - b.y0);
            const double cx = 0.5 * (b.x0 + b.x1);
            const double half = 0.5 * (b.x1 - b.x0) * t;
            return px >= cx - half && px <= cx + half;
        }
    }
    return false;
}

bool overlaps(const Box& a, const Box& b, float gap) {
    return a.x0 < b.x1 + gap && b.x0 < a.x1 + gap && a.y0 < b.y1 + gap && b.y0 < a.y1 + gap;
}

// Tight box of the painted pixels, so ground truth matches the raster exactly.
std::optional<Box> paint_object(Canvas& cv, ObjectClass cls, const Box& frame,
                                const std::array<double, 3>& color) {
    int min_x = cv.size, min_y = cv.size, max_x = -1, max_y = -1;
    for (int y = static_cast<int>(frame.y0); y < static_cast<int>(frame.y1); ++y) {
        for (int x = static_cast<int>(frame.x0); x < static_cast<int>(frame.x1); ++x) {
            if (!inside_shape(cls, frame, x + 0.5, y + 0.5)) {
                continue;
            }
            cv.set(y, x, color);
            min_x = std::min(min_x, x);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, x);
            max_y = std::max(max_y, y);
        }
    }
    if (max_x < 0) {
        return std::nullopt;
    }
    return Box{static_cast<int>(cls), static_cast<float>(min_x), static_cast<float>(min_y),
               static_cast<float>(max_x + 1), static_cast<float>(max_y + 1)};
}

std::vector<Box> paint_objects(Canvas& cv, Rng& rng) {
    const int wanted = uniform_int(rng, 1, 5);
    const int min_side = std::max(6, static_cast<int>(std::lround(0.18 * cv.size)));
    const int max_side = std::max(min_side, static_cast<int>(std::lround(0.32 * cv.size)));
    std::vector<Box> frames;
    std::vector<Box> boxes;
    constexpr int kMaxAttempts = 200;
    for (int attempt = 0; attempt < kMaxAttempts && static_cast<int>(boxes.size()) < wanted; ++attempt) {
        const auto cls = static_cast<ObjectClass>(uniform_int(rng, 0, kNumObjectClasses - 1));
        const int side = uniform_int(rng, min_side, max_side);
        const int x0 = uniform_int(rng, 0, cv.size - side);
        const int y0 = uniform_int(rng, 0, cv.size - side);
        const Box frame{static_cast<int>(cls), static_cast<float>(x0), static_cast<float>(y0),
                        static_cast<float>(x0 + side), static_cast<float>(y0 + side)};
        if (std::any_of(frames.begin(), frames.end(),
                        [&](const Box& other) { return overlaps(frame, other, 2.0f); })) {
            continue;
        }
        // Saturated colours keep objects distinguishable after degradation.
        std::array<double, 3> color = random_color(rng, 0.0, 0.3);
        color[static_cast<size_t>(uniform_int(rng, 0, 2))] = uniform(rng, 0.75, 1.0);
        if (auto box = paint_object(cv, cls, frame, color)) {
            frames.push_back(frame);
            boxes.push_back(*box);
        }
    }
    return boxes;
}

}  // namespace

const std::array<WaterPreset, kNumWaterTypes>& presets() {
    return kPresets;
}

void DegradationParams::validate() const {
    if (water_type < 0 || water_type >= kNumWaterTypes) {
        throw ValidationError("water type " + std::to_string(water_type) + " outside [0, 8]");
    }
    for (int c = 0; c < 3; ++c) {
        if (!(beta[c] >= 0.0) || !std::isfinite(beta[c])) {
            throw ValidationError("attenuation coefficients must be finite and non-negative");
        }
        if (!(backlight[c] >= 0.0 && backlight[c] <= 1.0)) {
            throw ValidationError("backlight must lie in [0, 1]");
        }
    }
    if (!(depth >= 0.0) || !std::isfinite(depth)) {
        throw ValidationError("depth must be finite and non-negative");
    }
}

ImageTensor degrade(const ImageTensor& clean, const DegradationParams& p) {
    p.validate();
    torch::NoGradGuard no_grad;
    const auto& j = clean.data();
    const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    auto beta = torch::tensor({p.beta[0], p.beta[1], p.beta[2]}, opts).view({1, 3, 1, 1});
    auto light = torch::tensor({p.backlight[0], p.backlight[1], p.backlight[2]}, opts).view({1, 3, 1, 1});
    auto transmission = torch::exp(-beta * p.depth);
    auto out = j.to(torch::kFloat64) * transmission + light * (1.0 - transmission);
    return ImageTensor(torch::clamp(out, 0.0, 1.0).to(j.scalar_type()));
}

DegradationParams sample_params(int water_type, Rng& rng, double jitter) {
    if (water_type < 0 || water_type >= kNumWaterTypes) {
        throw ValidationError("water type " + std::to_string(water_type) + " outside [0, 8]");
    }
    if (!(jitter >= 0.0 && jitter < 1.0)) {
        throw ValidationError("jitter must lie in [0, 1)");
    }
    const auto& preset = kPresets[static_cast<size_t>(water_type)];
    DegradationParams p;
    p.water_type = water_type;
    for (size_t c = 0; c < 3; ++c) {
        p.beta[c] = preset.beta[c] * (1.0 + jitter * uniform(rng, -1.0, 1.0));
        p.backlight[c] = std::clamp(preset.backlight[c] * (1.0 + jitter * uniform(rng, -1.0, 1.0)), 0.0, 1.0);
    }
    p.depth = uniform(rng, kMinDepth, kMaxDepth);
    return p;
}

Scene synth_clean_scene(Rng& rng, int size, bool with_objects) {
    if (size < ImageTensor::kMinSide || size % ImageTensor::kSideMultiple != 0) {
        throw ValidationError("scene size must be >= 16 and divisible by 8");
    }
    Canvas cv(size);
    paint_background(cv, rng);
    const int patches = uniform_int(rng, 2, 5);
    for (int i = 0; i < patches; ++i) {
        paint_texture_patch(cv, rng);
    }
    std::vector<Box> boxes;
    if (with_objects) {
        boxes = paint_objects(cv, rng);
    }
    auto t = torch::from_blob(cv.data.data(), {1, 3, size, size}, torch::kFloat32).clone();
    return {ImageTensor(std::move(t)), std::move(boxes)};
}

SceneSample make_sample(uint64_t seed, uint64_t index, int water_type, int size, bool with_objects) {
    auto scene_rng = substream(seed, streams::kScene, index);
    auto degrade_rng = substream(seed, streams::kDegradation, index);
    Scene scene = synth_clean_scene(scene_rng, size, with_objects);
    const auto params = sample_params(water_type, degrade_rng);
    ImageTensor degraded = degrade(scene.image, params);
    return {scene.image, std::move(degraded), water_type, std::move(scene.boxes)};
}

}  // namespace ia2u::watersim
