#pragma once

#include "ia2u/core/config.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace ia2u {

/// Random order of [0, n) for `epoch`, drawn from the shuffle stream of `seed`.
std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int epoch);

/// Number of mini-batches per epoch (last batch may be short).
int batches_per_epoch(int64_t n, int batch_size);

/// Copy of cfg whose total_steps / warmup_steps are filled from the epoch
/// budget when left at 0 (warmup = a tenth of the run, like 20 of 200 epochs).
RunConfig with_schedule(const RunConfig& cfg, int steps_per_epoch);

/// Sets the learning rate of every parameter group.
void set_learning_rate(torch::optim::Optimizer& opt, double lr);

/// Sets group i to `lr * scales[i]`; `scales` must have one entry per group.
void set_learning_rate(torch::optim::Optimizer& opt, double lr, const std::vector<double>& scales);

/// Gathers rows `idx[begin, end)` of `t` along dim 0.
torch::Tensor gather_rows(const torch::Tensor& t, const std::vector<int64_t>& idx, size_t begin, size_t end);

}  // namespace ia2u
