#include "posekit/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace posekit {

int thread_budget() {
  const char* env = std::getenv("POSEKIT_THREADS");
  if (env != nullptr && *env != '\0') {
    size_t pos = 0;
    int n = -1;
    try {
      n = std::stoi(env, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != std::strlen(env) || n < 0)
      throw std::invalid_argument("POSEKIT_THREADS must be a non-negative integer, got \"" +
                                  std::string(env) + "\"");
    return n == 0 ? 1 : n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(thread_budget(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
      const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace posekit
