#pragma once

#include "ia2u/core/rng.hpp"
#include "ia2u/core/tensor_types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ia2u::watersim {

inline constexpr int kNumWaterTypes = 9;
inline constexpr int kNumObjectClasses = 3;

/// Object classes drawn into synthetic scenes.
enum class ObjectClass : int { Disc = 0, Square = 1, Triangle = 2 };

/// One water-type preset: center of its (beta, backlight) region.
struct WaterPreset {
    const char* name;
    std::array<double, 3> beta;       // attenuation per metre, RGB
    std::array<double, 3> backlight;  // veiling light, RGB in [0, 1]
};

/// The nine presets, ordered from clear blue ocean to yellow turbid coastal water.
const std::array<WaterPreset, kNumWaterTypes>& presets();

/// Relative half-width of the uniform jitter applied around each preset center.
/// Presets are spaced so that red-channel attenuation intervals never overlap.
inline constexpr double kDefaultJitter = 0.04;
inline constexpr double kMinDepth = 2.0;
inline constexpr double kMaxDepth = 3.0;

struct DegradationParams {
    int water_type = 0;
    std::array<double, 3> beta{};
    std::array<double, 3> backlight{};
    double depth = 0.0;

    /// Throws ValidationError on negative beta/depth, backlight outside [0, 1]
    /// or water type outside [0, 8].
    void validate() const;
};

/// Axis-aligned box in pixel coordinates; the object covers [x0, x1) x [y0, y1).
struct Box {
    int cls = 0;
    float x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool operator==(const Box&) const = default;
};

/// I_c = J_c * exp(-beta_c * z) + B_c * (1 - exp(-beta_c * z)), clamped to [0, 1].
/// The same parameters are applied to every image of the batch.
ImageTensor degrade(const ImageTensor& clean, const DegradationParams& p);

/// Draws beta and backlight uniformly within +-jitter (relative) of the preset
/// center and depth uniformly in [kMinDepth, kMaxDepth].
DegradationParams sample_params(int water_type, Rng& rng, double jitter = kDefaultJitter);

struct Scene {
    ImageTensor image;  // (1, 3, size, size)
    std::vector<Box> boxes;
};

/// Procedural seabed-like scene: smooth two-colour gradient, textured patches
/// and, when `with_objects`, 1 to 5 non-overlapping discs/squares/triangles.
/// `size` must be a positive multiple of 8 (and at least 16).
Scene synth_clean_scene(Rng& rng, int size, bool with_objects);

struct SceneSample {
    ImageTensor clean;
    ImageTensor degraded;
    int water_type = 0;
    std::vector<Box> boxes;
};

/// The sample at global corpus position `index`; depends only on (seed, index).
SceneSample make_sample(uint64_t seed, uint64_t index, int water_type, int size, bool with_objects);

}  // namespace ia2u::watersim
