#include "volbound/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace volbound {

unsigned default_workers() {
  if (const char* env = std::getenv("VOLBOUND_WORKERS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_blocks(std::size_t n_blocks, unsigned workers,
                     const std::function<void(std::size_t)>& body) {
  if (n_blocks == 0) return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_blocks)));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < n_blocks; b = next++) {
        try {
          body(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n_blocks;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace volbound
