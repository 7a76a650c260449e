#ifndef SWT_PARALLEL_HPP
#define SWT_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace swt {

// Splits [0, n) into contiguous blocks, one per worker. Callers write only
// to per-index outputs, so results do not depend on the thread count.
// fn(begin, end, worker) runs once per block; threads <= 1 runs inline.
template <typename Fn>
void parallel_blocks(std::size_t n, unsigned threads, Fn&& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (workers == 1) {
        fn(std::size_t{0}, n, 0u);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk, e = std::min(n, b + chunk);
        pool.emplace_back([&, b, e, w] {
            try {
                if (b < e) fn(b, e, w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace swt

#endif
