#include "hartree/common.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace hartree {

namespace {

std::mutex warning_mutex;
WarningSink installed_sink;
std::map<std::string, int, std::less<>> warning_counts;
constexpr int kWarningsPerCategory = 3;

std::atomic<int> configured_threads{0};

}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(warning_mutex);
    std::swap(installed_sink, sink);
    warning_counts.clear();
    return sink;
}

void warn(std::string_view category, std::string_view message) {
    std::lock_guard lock(warning_mutex);
    if (installed_sink) {
        installed_sink(category, message);
        return;
    }
    auto it = warning_counts.find(category);
    if (it == warning_counts.end()) it = warning_counts.emplace(std::string(category), 0).first;
    int seen = it->second++;
    if (seen < kWarningsPerCategory) {
        std::cerr << "warning [" << category << "]: " << message << '\n';
    } else if (seen == kWarningsPerCategory) {
        std::cerr << "warning [" << category << "]: further messages suppressed\n";
    }
}

int thread_count() {
    int n = configured_threads.load();
    if (n > 0) return n;
    n = 1;
    if (const char* env = std::getenv("HARTREE_THREADS")) {
        int parsed = std::atoi(env);
        if (parsed > 0) n = parsed;
    }
    configured_threads.store(n);
    return n;
}

void set_thread_count(int threads) { configured_threads.store(threads > 0 ? threads : 1); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const auto workers = static_cast<std::size_t>(thread_count());
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        const std::size_t spawn = std::min(workers, count);
        pool.reserve(spawn);
        for (std::size_t w = 0; w < spawn; ++w) {
            pool.emplace_back([&] {
                try {
                    for (std::size_t i = next++; i < count; i = next++) body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace hartree
