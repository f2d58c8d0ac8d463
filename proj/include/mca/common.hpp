#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mca {

// Malformed or inconsistent input: bad files, shape mismatches, label ranges.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure: non-finite values, degenerate denominators, violated bounds.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad command-line or config usage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs fn(i) for i in [0, count). Each index must write only its own outputs;
// results are then identical for any thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mca
