#pragma once

#include <cstddef>
#include <functional>

namespace volbound {

// Worker count from VOLBOUND_WORKERS, defaulting to the logical CPU count.
unsigned default_workers();

// Number of paths simulated from one RNG substream. Fixed so that results do
// not depend on how blocks are spread over workers.
inline constexpr std::size_t kPathsPerBlock = 512;

// Runs body(block) for block in [0, n_blocks) on up to `workers` threads.
// Blocks are claimed dynamically; callers must write results by block index.
void parallel_blocks(std::size_t n_blocks, unsigned workers,
                     const std::function<void(std::size_t)>& body);

}  // namespace volbound
