#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace ncf {

/// Worker cap for embarrassingly parallel row loops, from NCF_THREADS.
/// Defaults to 1; results are bitwise identical for any setting because each
/// row writes only its own output.
inline int env_thread_cap() {
    const char* v = std::getenv("NCF_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    return n >= 1 ? n : 1;
}

template <typename Fn>
inline void parallel_rows(std::size_t n, Fn&& fn) {
    const int cap = env_thread_cap();
    if (cap <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cap), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace ncf
