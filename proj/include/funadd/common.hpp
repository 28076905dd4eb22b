#ifndef FUNADD_COMMON_HPP
#define FUNADD_COMMON_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace funadd {

/// Bad user input: malformed files, invalid configs, mismatched lengths.
/// The CLI maps this to exit code 2.
class input_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-finite solves, conditioning problems.
/// The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit, used for content hashes of datasets and configs.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), seed);
}

/// Runs fn(i) for i in [0, count) on up to n_threads threads.
/// fn must only touch disjoint state per index.
inline void parallel_for(std::size_t count, int n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n_threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(n_threads), count);
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    workers.emplace_back([&, t]() {
      for (std::size_t i = t; i < count; i += nt) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace funadd

#endif  // FUNADD_COMMON_HPP
