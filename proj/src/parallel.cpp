#include "llfl/parallel.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace llfl {

std::size_t worker_count() {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const char* env = std::getenv("LLFL_THREADS");
    if (env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) {
            const auto want = static_cast<std::size_t>(v);
            return want < hw ? want : hw;
        }
    }
    return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = worker_count();
    if (workers <= 1 || n < 2 * workers) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        if (begin >= n) break;
        const std::size_t end = (begin + chunk < n) ? begin + chunk : n;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace llfl
