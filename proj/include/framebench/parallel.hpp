#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace framebench {

/// Runs fn(i) for i in [0, n) on at most max_workers threads. fn must not
/// throw; callers capture per-item failures themselves.
template <class Fn>
void bounded_for_each(std::size_t n, std::size_t max_workers, Fn&& fn) {
    if (n == 0) {
        return;
    }
    const std::size_t workers = std::max<std::size_t>(1, std::min(n, max_workers));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
}

}  // namespace framebench
