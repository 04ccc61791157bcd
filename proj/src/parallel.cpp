#include "iconik/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace iconik {

namespace {
std::atomic<std::size_t> g_override{0};

std::size_t default_threads()
{
  if (char const *env = std::getenv("ICONIK_THREADS")) {
    long const n = std::strtol(env, nullptr, 10);
    if (n > 0) { return static_cast<std::size_t>(n); }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}
} // namespace

std::size_t thread_count()
{
  std::size_t const o = g_override.load();
  if (o > 0) { return o; }
  static std::size_t const n = default_threads();
  return n;
}

void set_thread_count(std::size_t n) { g_override.store(n); }

void parallel_for(std::size_t begin, std::size_t end, std::function<void(std::size_t, std::size_t)> const &fn,
                  std::size_t min_chunk)
{
  if (end <= begin) { return; }
  std::size_t const total = end - begin;
  std::size_t workers = std::min(thread_count(), (total + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    fn(begin, end);
    return;
  }
  std::size_t const chunk = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t const lo = begin + w * chunk;
    std::size_t const hi = std::min(end, lo + chunk);
    if (lo >= hi) { break; }
    pool.emplace_back([&, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) { failure = std::current_exception(); }
      }
    });
  }
  for (auto &t : pool) { t.join(); }
  if (failure) { std::rethrow_exception(failure); }
}

} // namespace iconik
