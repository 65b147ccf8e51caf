#pragma once

#include <cstddef>
#include <type_traits>

namespace traco {

// Number of worker threads for matrix kernels. Reads TRACO_THREADS once; the
// value is clamped to [1, hardware_concurrency].
int kernel_threads();

// Runs fn(begin, end) over disjoint chunks of [0, total). Chunks are assigned
// by index, so results are identical for any thread count as long as fn writes
// only to its own rows.
void parallel_for(std::size_t total, void* ctx, void (*fn)(void*, std::size_t, std::size_t));

template <typename F>
void parallel_for(std::size_t total, F&& f) {
    using Fn = std::remove_reference_t<F>;
    parallel_for(total, const_cast<Fn*>(&f), [](void* ctx, std::size_t b, std::size_t e) {
        (*static_cast<Fn*>(ctx))(b, e);
    });
}

}  // namespace traco
