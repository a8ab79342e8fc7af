#pragma once

#include <cstddef>
#include <functional>

namespace bsmp {

/// Number of worker threads used by path loops. Defaults to the value of the
/// BSMP_THREADS environment variable, or 1 when unset.
int worker_count();
void set_worker_count(int workers);

/// Fixed-size chunking used by every parallel loop. Chunk boundaries depend on
/// the problem size only, so per-chunk partial results (and their in-order
/// reduction) are identical for any worker count.
inline constexpr std::size_t kChunkSize = 512;

inline std::size_t chunk_count(std::size_t count) { return (count + kChunkSize - 1) / kChunkSize; }

/// Runs body(chunk_index, begin, end) over [0, count) split into kChunkSize
/// chunks. Exceptions thrown by any chunk are rethrown on the calling thread
/// (the one from the lowest-indexed failing chunk).
void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace bsmp
