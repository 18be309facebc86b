#pragma once

#include <cstdint>
#include <random>

namespace ia2u {

using Rng = std::mt19937_64;

/// Independent generator for item `index` of a run seeded with `seed`.
/// `stream` separates unrelated consumers (scene synthesis, degradation
/// sampling, shuffling) so they never share draws. Parallel and serial
/// consumers that agree on (seed, stream, index) see identical sequences.
Rng substream(uint64_t seed, uint64_t stream, uint64_t index = 0);

/// Seeds the global libtorch generator used for parameter initialization.
void seed_parameters(uint64_t seed);

namespace streams {
inline constexpr uint64_t kScene = 1;
inline constexpr uint64_t kDegradation = 2;
inline constexpr uint64_t kShuffle = 3;
inline constexpr uint64_t kSplit = 4;
}  // namespace streams

}  // namespace ia2u
