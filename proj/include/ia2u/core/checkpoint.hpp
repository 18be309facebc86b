#pragma once

#include "ia2u/core/config.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ia2u {

/// Binary checkpoint container. All integers little-endian:
///
///     magic        8 bytes  "IA2UCKPT"
///     version      u32 length + UTF-8 bytes   (kCheckpointVersion)
///     component    u32 length + UTF-8 bytes   ("classifier", "fen", "uie", "det")
///     step         u64
///     config       u32 length + UTF-8 `key = value` text
///     count        u32
///     count x { name: u32 length + bytes; ndim: u32; dims: ndim x i64;
///               data: numel x float32 }
///     checksum     u64 FNV-1a over every preceding byte
struct Checkpoint {
    std::string version;
    std::string component;
    RunConfig config;
    uint64_t step = 0;
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

inline constexpr const char* kCheckpointVersion = "ia2u-checkpoint/1";

/// Copies every named parameter and buffer of `module` (as float32, on CPU).
Checkpoint snapshot(const torch::nn::Module& module, const std::string& component,
                    const RunConfig& cfg, uint64_t step);

/// Throws IoError when the file cannot be written.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

void save_checkpoint(const torch::nn::Module& module, const std::string& component,
                     const RunConfig& cfg, uint64_t step, const std::string& path);

/// Throws IoError for unreadable files and CheckpointError for a bad magic,
/// version mismatch, checksum failure or truncation.
Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into `module`. Names and shapes must match
/// exactly in both directions; throws CheckpointError otherwise.
void restore(torch::nn::Module& module, const Checkpoint& ckpt);

/// Throws CheckpointError unless ckpt.component == expected.
void require_component(const Checkpoint& ckpt, const std::string& expected);

}  // namespace ia2u
