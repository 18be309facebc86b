#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ia2u {

/// From `epoch` onward training images are resized to `image_size`.
struct ProgressiveStage {
    int epoch = 0;
    int image_size = 0;

    bool operator==(const ProgressiveStage&) const = default;
};

/// Every knob of a run. Serialized as UTF-8 `key = value` lines, both inside
/// checkpoints and as the CLI config file.
struct RunConfig {
    uint64_t seed = 0;

    // Feature enhancement network.
    int channels = 32;
    int fen_blocks = 3;
    int attention_segments = 4;

    // Ablation toggles: water / degradation / sample prior, full-scale alignment.
    bool enable_water_prior = true;
    bool enable_degrad_prior = true;
    bool enable_sample_prior = true;
    bool enable_full_scale = true;
    /// Alignment target when full-scale alignment is off; one of {1, 2, 4}.
    int anchor_scale = 2;

    // Optimization. warmup_steps / total_steps of 0 are derived from the
    // epoch budget by the training loops (warmup = total / 10).
    double min_lr = 1e-9;
    double max_lr = 2.4e-3;
    int warmup_steps = 0;
    int total_steps = 0;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double momentum = 0.9;
    /// Learning-rate multiplier for the plugin's parameters in task training.
    double plugin_lr_scale = 1.0;
    int epochs = 20;
    int batch_size = 16;

    // UIE loss weights.
    double lambda_l1 = 1.0;
    double lambda_ssim = 0.1;

    std::vector<ProgressiveStage> progressive_sizes;

    /// Throws ConfigError when an invariant is violated (e.g. segments do not divide channels).
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

/// Applies one `key = value` assignment. Unknown keys throw ConfigError naming the key.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Renders every field, one `key = value` per line, in a fixed order.
std::string format_config(const RunConfig& cfg);

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Keys not listed in `extra_keys` go to RunConfig; listed ones are returned
/// through `extras` (used by the CLI for paths). Fields not mentioned keep
/// their value from `base`.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& extra_keys = {},
                       std::map<std::string, std::string>* extras = nullptr,
                       const RunConfig& base = {});

RunConfig load_config_file(const std::string& path,
                           const std::vector<std::string>& extra_keys = {},
                           std::map<std::string, std::string>* extras = nullptr,
                           const RunConfig& base = {});

/// Linear warmup from min_lr to max_lr over warmup_steps, then cosine decay
/// back to min_lr at total_steps. Throws ValidationError when step is outside
/// [0, total_steps].
double cosine_warmup_lr(int step, const RunConfig& cfg);

}  // namespace ia2u
