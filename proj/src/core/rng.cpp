#include "ia2u/core/rng.hpp"

#include <torch/torch.h>

namespace ia2u {

Rng substream(uint64_t seed, uint64_t stream, uint64_t index) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(stream), static_cast<uint32_t>(index),
                      static_cast<uint32_t>(index >> 32)};
    return Rng(seq);
}

void seed_parameters(uint64_t seed) {
    torch::manual_seed(seed);
}

}  // namespace ia2u
