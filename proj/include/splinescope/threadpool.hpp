#ifndef SPLINESCOPE_THREADPOOL_HPP
#define SPLINESCOPE_THREADPOOL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace splinescope {

// Fork-join helper for per-point fan-out (LC probes, PGD samples, region
// splitting). Callers write results into index-addressed slots, so the
// reduction order -- and therefore every aggregate -- is identical no
// matter how many workers run.
class ThreadPool {
public:
    explicit ThreadPool(int threads = 0)
        : threads_(threads > 0 ? threads
                               : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))) {}

    int size() const { return threads_; }

    template <typename Fn> // Fn: void(size_t index)
    void parallel_for(size_t n, Fn&& fn) const {
        if (n == 0) return;
        const int workers = static_cast<int>(std::min<size_t>(threads_, n));
        if (workers <= 1) {
            for (size_t i = 0; i < n; ++i) fn(i);
            return;
        }
        std::atomic<size_t> next{0};
        std::exception_ptr first_error;
        std::atomic<bool> failed{false};
        auto run = [&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) break;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    break;
                }
            }
        };
        std::vector<std::thread> team;
        team.reserve(workers - 1);
        for (int t = 1; t < workers; ++t) team.emplace_back(run);
        run();
        for (auto& t : team) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

private:
    int threads_;
};

inline const ThreadPool& serial_pool() {
    static ThreadPool pool(1);
    return pool;
}

} // namespace splinescope

#endif
