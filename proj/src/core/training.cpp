#include "ia2u/core/training.hpp"

#include "ia2u/core/error.hpp"
#include "ia2u/core/rng.hpp"

#include <algorithm>
#include <numeric>

namespace ia2u {

std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int epoch) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = substream(seed, streams::kShuffle, static_cast<uint64_t>(epoch));
    // Fisher-Yates with our own index draws; std::shuffle's algorithm is
    // implementation-defined.
    for (int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

int batches_per_epoch(int64_t n, int batch_size) {
    return static_cast<int>((n + batch_size - 1) / batch_size);
}

RunConfig with_schedule(const RunConfig& cfg, int steps_per_epoch) {
    RunConfig out = cfg;
    if (out.total_steps == 0) {
        out.total_steps = cfg.epochs * steps_per_epoch;
        out.warmup_steps = out.total_steps / 10;
    }
    return out;
}

void set_learning_rate(torch::optim::Optimizer& opt, double lr) {
    for (auto& group : opt.param_groups()) {
        group.options().set_lr(lr);
    }
}

void set_learning_rate(torch::optim::Optimizer& opt, double lr, const std::vector<double>& scales) {
    auto& groups = opt.param_groups();
    if (groups.size() != scales.size()) {
        throw ValidationError("expected " + std::to_string(groups.size()) + " learning-rate scales, got " +
                              std::to_string(scales.size()));
    }
    for (size_t i = 0; i < groups.size(); ++i) {
        groups[i].options().set_lr(lr * scales[i]);
    }
}

torch::Tensor gather_rows(const torch::Tensor& t, const std::vector<int64_t>& idx, size_t begin, size_t end) {
    std::vector<int64_t> slice(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                               idx.begin() + static_cast<std::ptrdiff_t>(end));
    return t.index_select(0, torch::tensor(slice, torch::kInt64));
}

}  // namespace ia2u
