#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nvsm {

// Runs fn(worker, begin, end) over a contiguous block partition of [0, n).
// The partition depends only on (n, workers), so any state a worker writes
// to per-index slots is reproducible for a fixed worker count, and callers
// that merge per-worker accumulators in worker order stay deterministic.
// A throwing worker rethrows on the caller (lowest worker index wins).
template <typename Fn>
void parallel_blocks(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    if (workers > n) workers = static_cast<unsigned>(n);
    const std::size_t chunk = n / workers;
    const std::size_t rem = n % workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    std::size_t begin = 0;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t end = begin + chunk + (w < rem ? 1 : 0);
        pool.emplace_back([&fn, &errors, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

// Element-wise variant for read-only maps into per-index result slots.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    parallel_blocks(n, workers, [&fn](unsigned, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

}  // namespace nvsm
