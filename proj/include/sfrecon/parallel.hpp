#pragma once

#include <cstddef>
#include <functional>

namespace sfr {

/// Worker count for data-parallel phases: the SFRECON_WORKERS environment
/// variable when set (clamped to >= 1), otherwise the hardware concurrency.
int worker_count();

/// Runs fn(begin, end, worker) over a static chunking of [0, n) on
/// `workers` threads and joins. Chunk boundaries depend only on (n, workers),
/// so any per-worker state can be reduced in worker order deterministically.
/// workers <= 1 runs inline.
void parallel_chunks(std::size_t n, int workers,
                     const std::function<void(std::size_t, std::size_t, int)>& fn);

}  // namespace sfr
