#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace jacspec::harness {

/// Runs task(i) for i in [begin, end) on `threads` workers and hands results
/// to `sink` strictly in index order, whatever order they finish in.
///
/// `sink` runs under a lock, one call at a time, and may return false to stop
/// the run early (no later index is delivered). The first exception thrown by
/// a task or the sink is rethrown on the calling thread.
template <class Result>
void run_ordered(std::size_t begin, std::size_t end, std::size_t threads,
                 const std::function<Result(std::size_t)>& task,
                 const std::function<bool(std::size_t, Result&)>& sink) {
    if (begin >= end) return;
    if (threads <= 1) {
        for (std::size_t i = begin; i < end; ++i) {
            Result r = task(i);
            if (!sink(i, r)) return;
        }
        return;
    }

    std::atomic<std::size_t> next{begin};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::map<std::size_t, Result> ready;
    std::size_t emit = begin;
    std::exception_ptr failure;

    const auto worker = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= end) break;
            try {
                Result r = task(i);
                std::lock_guard lock(mu);
                ready.emplace(i, std::move(r));
                while (!stop.load()) {
                    auto it = ready.find(emit);
                    if (it == ready.end()) break;
                    if (!sink(emit, it->second)) stop = true;
                    ready.erase(it);
                    ++emit;
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t count = std::min(threads, end - begin);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace jacspec::harness
