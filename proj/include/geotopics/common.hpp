// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef GEOTOPICS_COMMON_HPP
#define GEOTOPICS_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace geotopics {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable streams, missing files.
struct IoError : Error {
  using Error::Error;
};

// Wrong file format, schema violations, version mismatches.
struct FormatError : Error {
  using Error::Error;
};

// Contract violations on values: bad arguments, broken invariants.
struct DomainError : Error {
  using Error::Error;
};

// Summation with a fixed pairwise reduction tree. Used for the large
// M-step/likelihood reductions so that results do not depend on how work
// is chunked across threads.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 32) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(std::span<const double>(values));
}

// Runs fn(i) for i in [0, n). Each call must only write to its own slot;
// the split into threads carries no reduction, so results are identical
// for every thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace geotopics

#endif  // GEOTOPICS_COMMON_HPP
