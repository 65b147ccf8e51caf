#include "traco/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace traco {

int kernel_threads() {
    static const int n = [] {
        unsigned hw = std::thread::hardware_concurrency();
        if (hw == 0) hw = 1;
        int want = static_cast<int>(std::min(hw, 8u));
        if (const char* env = std::getenv("TRACO_THREADS")) {
            long parsed = std::strtol(env, nullptr, 10);
            if (parsed >= 1) want = static_cast<int>(std::min<long>(parsed, hw));
        }
        return want;
    }();
    return n;
}

void parallel_for(std::size_t total, void* ctx, void (*fn)(void*, std::size_t, std::size_t)) {
    const int threads = kernel_threads();
    if (threads <= 1 || total < 2) {
        fn(ctx, 0, total);
        return;
    }
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(threads), total);
    const std::size_t chunk = (total + n - 1) / n;
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(total, b + chunk);
        if (b >= e) break;
        pool.emplace_back([=] { fn(ctx, b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace traco
